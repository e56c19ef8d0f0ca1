#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "choicecheck/choice_data.hpp"
#include "choicecheck/error.hpp"
#include "synthetic.hpp"

using namespace choicecheck;
namespace fs = std::filesystem;

namespace {

fs::path write_temp(const std::string& name, const std::string& text) {
  const fs::path p = fs::temp_directory_path() / ("choicecheck_test_" + name);
  std::ofstream(p) << text;
  return p;
}

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("minimal long CSV loads into two choice sets") {
  const auto p = write_temp("min.csv", "obs_id,alt_id,choice,price\n1,1,1,2.5\n1,2,0,3.0\n2,1,0,1.0\n2,2,1,4.0\n");
  const ChoiceDataset d = load_long_csv(p);
  CHECK(d.n_rows() == 4);
  CHECK(d.n_sets() == 2);
  CHECK(d.chosen_rows() == std::vector<std::uint32_t>{0, 3});
  CHECK(d.column("price").values == std::vector<double>{2.5, 3.0, 1.0, 4.0});
}

TEST_CASE("two chosen rows in one set is a validation error naming the obs_id") {
  const auto p = write_temp("two.csv", "obs_id,alt_id,choice,price\n1,1,1,2.5\n1,2,1,3.0\n2,1,0,1.0\n2,2,1,4.0\n");
  std::string msg;
  try {
    load_long_csv(p);
  } catch (const ValidationError& e) {
    msg = e.what();
  }
  REQUIRE(!msg.empty());
  CHECK(msg.find('1') != std::string::npos);
}

TEST_CASE("loader errors") {
  CHECK_THROWS_AS(load_long_csv(write_temp("nocol.csv", "obs,alt_id,choice\n1,1,1\n")), SchemaError);
  const std::string parse = error_of(
      [] { load_long_csv(write_temp("nan.csv", "obs_id,alt_id,choice,x\n1,1,1,1\n1,2,0,1\n2,1,1,nan\n2,2,0,1\n")); });
  CHECK(parse.find("line 4") != std::string::npos);
  CHECK_THROWS_AS(load_long_csv(write_temp("nan2.csv", "obs_id,alt_id,choice,x\n1,1,1,1\n1,2,0,inf\n")), ParseError);
  CHECK_THROWS_AS(load_long_csv(write_temp("dup.csv", "obs_id,alt_id,choice\n1,1,1\n1,1,0\n")), ValidationError);
  CHECK_THROWS_AS(load_long_csv(write_temp("none.csv", "obs_id,alt_id,choice\n1,1,0\n1,2,0\n")), ValidationError);
  CHECK_THROWS_AS(load_long_csv("/nonexistent/file.csv"), IoError);
}

TEST_CASE("categorical columns keep trimmed strings") {
  const auto p = write_temp("cat.csv", "obs_id,alt_id,choice,fuel\n1,1,1, gasoline \n1,2,0,electric\n");
  const ChoiceDataset d = load_long_csv(p);
  CHECK_FALSE(d.column("fuel").numeric);
  CHECK(d.column("fuel").text[0] == "gasoline");
  CHECK(match_rows(d, "fuel", "gasoline") == std::vector<std::uint8_t>{1, 0});
  CHECK(distinct_values(d, "fuel") == std::vector<std::string>{"electric", "gasoline"});
}

TEST_CASE("long CSV round-trip is field-for-field identical") {
  const ChoiceDataset d = testdata::random_dataset(3, 25, 2, 5, 3);
  const fs::path p = fs::temp_directory_path() / "choicecheck_test_roundtrip.csv";
  write_long_csv(d, p);
  const ChoiceDataset back = load_long_csv(p);
  CHECK(back == d);
}

TEST_CASE("wide layout converts to long rows with transforms") {
  const auto p = write_temp("wide.csv",
                            "id,choice,price1,price2,fuel1,fuel2,inc\n"
                            "7,choice2,1.5,2.5,gas,electric,3\n"
                            "9,choice1,4,5,electric,methanol,1\n");
  WideSchema s;
  s.obs_id = "id";
  s.choice_prefix = "choice";
  s.n_alternatives = 2;
  s.alt_vars = {"price", "fuel"};
  s.case_vars = {"inc"};
  s.transforms.value_maps["fuel"] = {{"electric", "methanol"}, {"methanol", "electric"}};
  s.transforms.derived.push_back({"price10", "price", 10.0, 0.0});
  const ChoiceDataset d = load_wide_csv(p, s);
  CHECK(d.n_rows() == 4);
  CHECK(d.n_sets() == 2);
  CHECK(std::vector<std::int64_t>(d.obs_ids().begin(), d.obs_ids().end()) == std::vector<std::int64_t>{7, 7, 9, 9});
  CHECK(std::vector<std::uint8_t>(d.choices().begin(), d.choices().end()) == std::vector<std::uint8_t>{0, 1, 1, 0});
  CHECK(d.column("fuel").text == std::vector<std::string>{"gas", "methanol", "methanol", "electric"});
  CHECK(d.column("price10").values == std::vector<double>{15, 25, 40, 50});
  CHECK(d.column("inc").values == std::vector<double>{3, 3, 1, 1});
}

TEST_CASE("schema JSON parsing") {
  const auto j = nlohmann::json::parse(R"({"obs_id":"o","alt_id":"a","choice":"c","categorical":["size"]})");
  const LongSchema s = long_schema_from_json(j);
  CHECK(s.obs_id == "o");
  CHECK(s.alt_id == "a");
  CHECK(s.transforms.categorical == std::vector<std::string>{"size"});
}

TEST_CASE("subset_sets and with_numeric_column") {
  const ChoiceDataset d = testdata::random_dataset(5, 6, 3, 3, 1);
  const std::vector<std::size_t> keep{4, 1};
  const ChoiceDataset s = d.subset_sets(keep);
  CHECK(s.n_sets() == 2);
  CHECK(s.obs_ids()[0] == 5);
  CHECK(s.obs_ids()[3] == 2);
  std::vector<double> zeros(d.n_rows(), 0.0);
  const ChoiceDataset z = d.with_numeric_column("x0", zeros);
  CHECK(z.column("x0").values == zeros);
  CHECK(d.column("x0").values != zeros);
}

TEST_CASE("format_double round-trips") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 12345678.9, 0.0}) CHECK(parse_double(format_double(v)).value() == v);
  CHECK_FALSE(parse_double("abc").has_value());
  CHECK(trim("  a b ") == "a b");
}
