#include "doctest.h"
#include "properties.hpp"

// Smaller instance counts here keep the unit run quick; the acceptance
// runner repeats every suite at the full count.
TEST_SUITE_BEGIN("properties");

TEST_CASE("randomized invariant suites hold") {
  for (int suite = 1; suite <= props::kSuiteCount; ++suite) {
    CAPTURE(suite);
    CAPTURE(props::suite_name(suite));
    auto out = props::run_suite(suite, 25, 0xabcdef01u + static_cast<unsigned>(suite));
    CHECK(out.instances >= 25);
    CHECK_MESSAGE(out.failures == 0, props::suite_name(suite), ": ", out.detail);
  }
}

TEST_SUITE_END();
