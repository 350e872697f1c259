#include <cstdio>
#include <sstream>
#include <string>

#include "doctest.h"
#include "tdep/error.hpp"
#include "tdep/io.hpp"
#include "tdep/measure.hpp"

using namespace tdep;

TEST_SUITE_BEGIN("io");

TEST_CASE("format_double round-trips exactly") {
  for (double v : {0.1, 1.0 / 3.0, 2.5e-308, 1e17, -0.0, 3.0}) {
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK(format_double(1.0) == "1");
}

TEST_CASE("csv write then read reproduces the measure bit for bit") {
  auto gamma = from_samples({0.1, 0.2, 1.0 / 3.0, 0.4, 0.5, 0.6},
                            {1e-12, 2.5, 3.25}, 2, 1);
  std::stringstream ss;
  write_samples_csv(ss, gamma);
  auto back = read_samples_csv(ss);
  REQUIRE(back.size() == gamma.size());
  REQUIRE(back.x_dim() == 2);
  REQUIRE(back.y_dim() == 1);
  CHECK(back.x_points() == gamma.x_points());
  CHECK(back.y_points() == gamma.y_points());
}

TEST_CASE("csv header names the dimensions") {
  auto gamma = from_samples({1.0, 2.0}, {3.0, 4.0, 5.0, 6.0}, 1, 2);
  std::stringstream ss;
  write_samples_csv(ss, gamma);
  std::string header;
  std::getline(ss, header);
  CHECK(header == "x1,y1,y2");
}

TEST_CASE("csv read rejects malformed input") {
  std::stringstream no_y("x1,x2\n1,2\n");
  CHECK_THROWS_AS(read_samples_csv(no_y), DataError);
  std::stringstream bad_field("x1,y1\n1,oops\n");
  CHECK_THROWS_AS(read_samples_csv(bad_field), DataError);
  std::stringstream short_row("x1,y1,y2\n1,2\n");
  CHECK_THROWS_AS(read_samples_csv(short_row), DataError);
  std::stringstream empty("");
  CHECK_THROWS_AS(read_samples_csv(empty), DataError);
}

TEST_CASE("file helpers raise DataError on unopenable paths") {
  CHECK_THROWS_AS(read_samples_csv_file("/nonexistent/dir/file.csv"), DataError);
  auto gamma = from_samples({1.0}, {2.0}, 1, 1);
  CHECK_THROWS_AS(write_samples_csv_file("/nonexistent/dir/file.csv", gamma), DataError);
}

TEST_CASE("file round trip") {
  std::string path = "tdep_io_test_tmp.csv";
  auto gamma = from_samples({0.25, 0.75}, {1.5, -2.5}, 1, 1);
  write_samples_csv_file(path, gamma);
  auto back = read_samples_csv_file(path);
  CHECK(back.x_points() == gamma.x_points());
  CHECK(back.y_points() == gamma.y_points());
  std::remove(path.c_str());
}

TEST_SUITE_END();
