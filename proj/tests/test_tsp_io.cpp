// Copyright 2026 The stsp Authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "stsp/error.hpp"
#include "stsp/tsp.hpp"
#include "stsp/tsp_io.hpp"

using namespace stsp;

TEST(TspIo, InstancesRoundTripExactly) {
  const auto instances = generate_instances(30, 11, 77);
  std::stringstream s;
  write_instances(s, instances);
  EXPECT_EQ(read_instances(s), instances);
}

TEST(TspIo, ToursRoundTripExactly) {
  std::vector<Tour> tours;
  for (const auto& inst : generate_instances(10, 8, 3)) tours.push_back(solve_exact(inst));
  std::stringstream s;
  write_tours(s, tours);
  EXPECT_EQ(read_tours(s), tours);
}

TEST(TspIo, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "stsp_io_test.tspjl";
  const auto instances = generate_instances(4, 6, 1);
  write_instances(path, instances);
  EXPECT_EQ(read_instances(path), instances);
  std::filesystem::remove(path);
  EXPECT_THROW(read_instances(path), IoError);
}

TEST(TspIo, FormatRealRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, 2.0 + std::sqrt(2.0), 1e-300, 0.0}) {
    EXPECT_EQ(std::stod(format_real(v)), v);
  }
}

TEST(TspIo, BlankLinesAndCrlfAreAccepted) {
  std::stringstream s("\n{\"n\":3,\"coords\":[[0.9,0.9],[0.5,0.5],[0.1,0.1]]}\r\n\n");
  EXPECT_EQ(read_instances(s).size(), 1u);
}

TEST(TspIo, EmptyInputHasNoInstances) {
  std::stringstream s("");
  EXPECT_TRUE(read_instances(s).empty());
}

namespace {

std::size_t parse_error_line(const std::string& text) {
  std::stringstream s(text);
  try {
    read_instances(s);
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

}  // namespace

TEST(TspIo, ParseErrorsCarryTheLineNumber) {
  const std::string good = "{\"n\":3,\"coords\":[[0.9,0.9],[0.5,0.5],[0.1,0.1]]}\n";
  EXPECT_EQ(parse_error_line(good + "{not json\n"), 2u);
  EXPECT_EQ(parse_error_line(good + good + "{\"n\":4,\"coords\":[[0.9,0.9],[0.5,0.5],[0.1,0.1]]}\n"),
            3u);
  EXPECT_EQ(parse_error_line("{\"n\":3,\"coords\":[[0.9,0.9],[0.5],[0.1,0.1]]}\n"), 1u);
  EXPECT_EQ(parse_error_line("{\"n\":3,\"coords\":[[0.9,0.9],[0.5,\"a\"],[0.1,0.1]]}\n"), 1u);
  // Out of canonical order.
  EXPECT_EQ(parse_error_line("{\"n\":3,\"coords\":[[0.1,0.1],[0.5,0.5],[0.9,0.9]]}\n"), 1u);
  // Outside the unit square.
  EXPECT_EQ(parse_error_line("{\"n\":3,\"coords\":[[1.9,0.9],[0.5,0.5],[0.1,0.1]]}\n"), 1u);
  EXPECT_EQ(parse_error_line("[1,2]\n"), 1u);
}
