#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include <doctest.h>

#include "dmlab/io.hpp"
#include "helpers.hpp"

using dmlab::Dyadic;
using dmlab::Instance;
using dmlab::Rng;
using dmlab::SchemaError;

TEST_CASE("instance round-trip") {
  Rng rng(808);
  const auto space = dmlab::testing::random_space(rng, 5, 3);
  const auto process = dmlab::testing::random_adapted_process(rng, space, 2);
  const std::string text = dmlab::instance_to_json(space, &process);
  const Instance inst = dmlab::parse_instance(text);

  CHECK(inst.space.atom_count() == space.atom_count());
  CHECK(inst.space.depth() == space.depth());
  for (std::size_t i = 0; i < space.atom_count(); ++i) {
    CHECK(inst.space.atoms()[i] == space.atoms()[i]);
    CHECK(inst.space.prob(i) == space.prob(i));  // exact: shortest round-trip
  }
  for (std::int64_t j = 0; j < space.master_point_count(); ++j) {
    CHECK(inst.space.partition_at_index(j).block_of == space.partition_at_index(j).block_of);
  }
  REQUIRE(inst.process.has_value());
  CHECK(inst.process->level == process.level);
  for (std::int64_t j = 0; j < process.point_count(); ++j) {
    for (std::size_t i = 0; i < space.atom_count(); ++i) {
      CHECK(inst.process->at_index(j)[i] == process.at_index(j)[i]);
    }
  }
}

TEST_CASE("loader reports the first violation with its location") {
  CHECK_THROWS_WITH_AS(dmlab::parse_instance("{"), doctest::Contains("json:"),
                       SchemaError);
  CHECK_THROWS_WITH_AS(dmlab::parse_instance(R"({"probs": []})"),
                       doctest::Contains("missing key \"atoms\""), SchemaError);
  CHECK_THROWS_WITH_AS(
      dmlab::parse_instance(
          R"({"atoms": ["a","b"], "probs": [0.5, 0.6], "depth": 1,
              "partitions": {"0/2^0": [[0,1]], "1/2^1": [[0,1]], "1/2^0": [[0],[1]]}})"),
      doctest::Contains("probs: sum"), SchemaError);

  SUBCASE("atom in two blocks") {
    CHECK_THROWS_WITH_AS(
        dmlab::parse_instance(
            R"({"atoms": ["a","b"], "probs": [0.5, 0.5], "depth": 1,
                "partitions": {"0/2^0": [[0,1]], "1/2^1": [[0,1]], "1/2^0": [[0,1],[1]]}})"),
        doctest::Contains("appears in two blocks"), SchemaError);
  }

  SUBCASE("missing partition time") {
    CHECK_THROWS_WITH_AS(
        dmlab::parse_instance(
            R"({"atoms": ["a","b"], "probs": [0.5, 0.5], "depth": 1,
                "partitions": {"0/2^0": [[0,1]], "1/2^0": [[0],[1]]}})"),
        doctest::Contains("missing time \"1/2^1\""), SchemaError);
  }

  SUBCASE("bad partition key") {
    CHECK_THROWS_WITH_AS(
        dmlab::parse_instance(
            R"({"atoms": ["a","b"], "probs": [0.5, 0.5], "depth": 1,
                "partitions": {"0/2^0": [[0,1]], "0.5": [[0,1]], "1/2^0": [[0],[1]]}})"),
        doctest::Contains("not a dyadic time"), SchemaError);
  }

  SUBCASE("atom missing from partition") {
    CHECK_THROWS_WITH_AS(
        dmlab::parse_instance(
            R"({"atoms": ["a","b"], "probs": [0.5, 0.5], "depth": 1,
                "partitions": {"0/2^0": [[0,1]], "1/2^1": [[0,1]], "1/2^0": [[0]]}})"),
        doctest::Contains("missing from every block"), SchemaError);
  }

  SUBCASE("non-adapted process") {
    CHECK_THROWS_WITH_AS(
        dmlab::parse_instance(
            R"({"atoms": ["a","b"], "probs": [0.5, 0.5], "depth": 1,
                "partitions": {"0/2^0": [[0,1]], "1/2^1": [[0,1]], "1/2^0": [[0],[1]]},
                "process": {"level": 1, "values": {"0/2^0": [0, 1],
                                                    "1/2^1": [0, 0],
                                                    "1/2^0": [1, 2]}}})"),
        doctest::Contains("not adapted"), SchemaError);
  }

  SUBCASE("process value count") {
    CHECK_THROWS_WITH_AS(
        dmlab::parse_instance(
            R"({"atoms": ["a","b"], "probs": [0.5, 0.5], "depth": 1,
                "partitions": {"0/2^0": [[0,1]], "1/2^1": [[0,1]], "1/2^0": [[0],[1]]},
                "process": {"level": 1, "values": {"0/2^0": [0],
                                                    "1/2^1": [0, 0],
                                                    "1/2^0": [1, 2]}}})"),
        doctest::Contains("expected 2 values"), SchemaError);
  }
}

TEST_CASE("dyadic keys are canonicalized on load") {
  // "2/2^2" denotes the same time as "1/2^1"; duplicates are rejected
  CHECK_THROWS_WITH_AS(
      dmlab::parse_instance(
          R"({"atoms": ["a","b"], "probs": [0.5, 0.5], "depth": 1,
              "partitions": {"0/2^1": [[0,1]], "1/2^1": [[0,1]], "2/2^1": [[0],[1]],
                             "1/2^0": [[0],[1]]}})"),
      doctest::Contains("duplicate time"), SchemaError);
  const Instance inst = dmlab::parse_instance(
      R"({"atoms": ["a","b"], "probs": [0.5, 0.5], "depth": 1,
          "partitions": {"0/2^1": [[0,1]], "1/2^1": [[0,1]], "2/2^1": [[0],[1]]}})");
  CHECK(inst.space.partition_at(Dyadic::one()).block_count == 2);
}

TEST_CASE("17-significant-digit formatting round-trips") {
  Rng rng(4096);
  for (int rep = 0; rep < 2000; ++rep) {
    double x = rng.symmetric() * std::ldexp(1.0, static_cast<int>(rng.below(40)) - 20);
    const std::string s = dmlab::format_double(x);
    CHECK(std::stod(s) == x);
  }
  CHECK(dmlab::format_double(0.0) == "0");
  CHECK(dmlab::format_double(1.0) == "1");
}

TEST_CASE("report writers") {
  const auto tree = dmlab::binary_tree_space(4);
  const auto walk = dmlab::gen_squared_walk(tree);
  const auto diag = dmlab::ui_diagnostics(tree, walk, 2, 3, {0.5, 1.0});
  const std::string csv = dmlab::ui_diagnostics_to_csv(diag);
  CHECK(csv.rfind("level,c,tail_mass,prob_tau_lt_1,lhs_eq1,rhs_eq1,markov_bound\n", 0) ==
        0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 2 * 2);

  std::vector<dmlab::RandomVariable> m1s;
  for (int n = 2; n <= 4; ++n) {
    m1s.push_back(dmlab::doob_decompose_discrete(tree, walk, n).m.horizon());
  }
  const auto ext = dmlab::komlos_extract(tree, m1s);
  const std::string json_text = dmlab::komlos_report_to_json(ext);
  CHECK(json_text.find("\"tail_inf\"") != std::string::npos);
  CHECK(json_text.find("\"certificate_gap\"") != std::string::npos);
  CHECK(json_text.find("\"weights\"") != std::string::npos);

  const std::vector<std::pair<std::string, dmlab::StoppingTime>> targets{
      {"t=1/2^0", dmlab::constant_stopping_time(tree, Dyadic::one(), 4)}};
  const auto curve = dmlab::convergence_curve(tree, walk, 2, 3, targets);
  const std::string curve_csv = dmlab::convergence_curve_to_csv(curve);
  CHECK(curve_csv.rfind(
            "depth,t_or_tau,l1_gap_A,l1_gap_M1,mean_gap_at_tau,per_atom_bound\n", 0) == 0);
}
