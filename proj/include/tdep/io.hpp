#pragma once

#include <iosfwd>
#include <string>

#include "tdep/measure.hpp"

namespace tdep {

// CSV of paired samples. Header names the columns x1..xr,y1..yq; every data
// row holds r+q finite doubles. Values are written with shortest round-trip
// formatting, so write followed by read reproduces the measure bit-for-bit.
JointDiscreteMeasure read_samples_csv(std::istream& in);
JointDiscreteMeasure read_samples_csv_file(const std::string& path);

void write_samples_csv(std::ostream& out, const JointDiscreteMeasure& gamma);
void write_samples_csv_file(const std::string& path, const JointDiscreteMeasure& gamma);

// Shortest decimal string that parses back to exactly the same double.
std::string format_double(double v);

}  // namespace tdep
