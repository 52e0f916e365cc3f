#include "dmlab/io.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dmlab/numeric.hpp"

namespace dmlab {

namespace {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

[[noreturn]] void schema_fail(const std::string& where, const std::string& what) {
  throw SchemaError(where + ": " + what);
}

const json& member(const json& j, const char* key, const std::string& where) {
  const auto it = j.find(key);
  if (it == j.end()) schema_fail(where, std::string("missing key \"") + key + "\"");
  return *it;
}

std::vector<Partition> parse_partitions(const json& node, std::size_t atom_count,
                                        int depth) {
  if (!node.is_object()) schema_fail("partitions", "expected an object keyed by dyadic times");
  const std::int64_t points = (std::int64_t{1} << depth) + 1;
  std::vector<Partition> partitions(static_cast<std::size_t>(points));
  std::vector<bool> present(static_cast<std::size_t>(points), false);

  for (const auto& [key, value] : node.items()) {
    const std::string where = "partitions[\"" + key + "\"]";
    const auto t = Dyadic::parse(key);
    if (!t) schema_fail(where, "key is not a dyadic time \"j/2^n\"");
    if (!on_grid(*t, depth)) schema_fail(where, "time is not on the master grid");
    const auto idx = static_cast<std::size_t>(index_at_level(*t, depth));
    if (present[idx]) schema_fail(where, "duplicate time (after canonicalization)");
    present[idx] = true;

    if (!value.is_array()) schema_fail(where, "expected an array of blocks");
    std::vector<std::int32_t> block_of(atom_count, -1);
    std::int32_t block_id = 0;
    for (const auto& block : value) {
      if (!block.is_array()) schema_fail(where, "block is not an array of atom indices");
      for (const auto& entry : block) {
        if (!entry.is_number_integer()) schema_fail(where, "atom index is not an integer");
        const auto atom = entry.get<std::int64_t>();
        if (atom < 0 || atom >= static_cast<std::int64_t>(atom_count)) {
          schema_fail(where, "atom index " + std::to_string(atom) + " out of range");
        }
        if (block_of[static_cast<std::size_t>(atom)] >= 0) {
          schema_fail(where, "atom " + std::to_string(atom) + " appears in two blocks");
        }
        block_of[static_cast<std::size_t>(atom)] = block_id;
      }
      ++block_id;
    }
    for (std::size_t i = 0; i < atom_count; ++i) {
      if (block_of[i] < 0) {
        schema_fail(where, "atom " + std::to_string(i) + " missing from every block");
      }
    }
    partitions[idx] = Partition::from_block_ids(std::move(block_of));
  }
  for (std::int64_t j = 0; j < points; ++j) {
    if (!present[static_cast<std::size_t>(j)]) {
      schema_fail("partitions", "missing time \"" + Dyadic::of(j, depth).str() + "\"");
    }
  }
  return partitions;
}

AdaptedProcess parse_process(const json& node, const FiniteFilteredSpace& space) {
  if (!node.is_object()) schema_fail("process", "expected an object");
  const json& level_node = member(node, "level", "process");
  if (!level_node.is_number_integer()) schema_fail("process.level", "expected an integer");
  const int level = level_node.get<int>();
  if (level < 0 || level > space.depth()) {
    schema_fail("process.level", "level out of range [0, master depth]");
  }
  const json& values = member(node, "values", "process");
  if (!values.is_object()) schema_fail("process.values", "expected an object");

  const std::int64_t points = (std::int64_t{1} << level) + 1;
  AdaptedProcess p;
  p.level = level;
  p.values.assign(static_cast<std::size_t>(points), RandomVariable{});
  std::vector<bool> present(static_cast<std::size_t>(points), false);
  for (const auto& [key, value] : values.items()) {
    const std::string where = "process.values[\"" + key + "\"]";
    const auto t = Dyadic::parse(key);
    if (!t) schema_fail(where, "key is not a dyadic time \"j/2^n\"");
    if (!on_grid(*t, level)) schema_fail(where, "time is not on the process grid");
    const auto idx = static_cast<std::size_t>(index_at_level(*t, level));
    if (present[idx]) schema_fail(where, "duplicate time (after canonicalization)");
    present[idx] = true;
    if (!value.is_array() || value.size() != space.atom_count()) {
      schema_fail(where, "expected " + std::to_string(space.atom_count()) + " values");
    }
    RandomVariable v(space.atom_count());
    for (std::size_t i = 0; i < space.atom_count(); ++i) {
      if (!value[i].is_number()) schema_fail(where, "non-numeric entry");
      v[i] = value[i].get<double>();
      if (!std::isfinite(v[i])) schema_fail(where, "non-finite entry");
    }
    p.values[idx] = std::move(v);
  }
  for (std::int64_t j = 0; j < points; ++j) {
    if (!present[static_cast<std::size_t>(j)]) {
      schema_fail("process.values", "missing time \"" + Dyadic::of(j, level).str() + "\"");
    }
  }
  if (!is_adapted(space, p)) {
    schema_fail("process", "values are not adapted to the filtration");
  }
  return p;
}

}  // namespace

Instance parse_instance(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("json: ") + e.what());
  }
  if (!root.is_object()) throw SchemaError("root: expected a JSON object");

  const json& atoms_node = member(root, "atoms", "root");
  if (!atoms_node.is_array() || atoms_node.empty()) {
    schema_fail("atoms", "expected a nonempty array");
  }
  std::vector<std::string> atoms;
  atoms.reserve(atoms_node.size());
  for (const auto& a : atoms_node) {
    if (!a.is_string()) schema_fail("atoms", "expected strings");
    atoms.push_back(a.get<std::string>());
  }

  const json& probs_node = member(root, "probs", "root");
  if (!probs_node.is_array() || probs_node.size() != atoms.size()) {
    schema_fail("probs", "expected one probability per atom");
  }
  std::vector<double> probs;
  probs.reserve(probs_node.size());
  for (const auto& p : probs_node) {
    if (!p.is_number()) schema_fail("probs", "expected numbers");
    probs.push_back(p.get<double>());
  }

  const json& depth_node = member(root, "depth", "root");
  if (!depth_node.is_number_integer()) schema_fail("depth", "expected an integer");
  const int depth = depth_node.get<int>();
  if (depth < 1 || depth > 30) schema_fail("depth", "must be in [1, 30]");

  std::vector<Partition> partitions =
      parse_partitions(member(root, "partitions", "root"), atoms.size(), depth);

  Instance inst{FiniteFilteredSpace([&] {
                  try {
                    return FiniteFilteredSpace(std::move(atoms), std::move(probs), depth,
                                               std::move(partitions));
                  } catch (const std::invalid_argument& e) {
                    throw SchemaError(e.what());
                  }
                }()),
                std::nullopt};

  if (const auto it = root.find("process"); it != root.end()) {
    inst.process = parse_process(*it, inst.space);
  }
  return inst;
}

Instance load_instance(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError(path + ": cannot open file");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_instance(buffer.str());
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string instance_to_json(const FiniteFilteredSpace& space,
                             const AdaptedProcess* process) {
  ordered_json root;
  root["atoms"] = space.atoms();
  root["probs"] = space.probs();
  root["depth"] = space.depth();
  ordered_json parts = ordered_json::object();
  for (std::int64_t j = 0; j < space.master_point_count(); ++j) {
    const Partition& p = space.partition_at_index(j);
    std::vector<std::vector<std::int64_t>> blocks(
        static_cast<std::size_t>(p.block_count));
    for (std::size_t i = 0; i < p.block_of.size(); ++i) {
      blocks[static_cast<std::size_t>(p.block_of[i])].push_back(
          static_cast<std::int64_t>(i));
    }
    parts[Dyadic::of(j, space.depth()).str()] = blocks;
  }
  root["partitions"] = std::move(parts);
  if (process != nullptr) {
    ordered_json values = ordered_json::object();
    for (std::int64_t j = 0; j < process->point_count(); ++j) {
      values[Dyadic::of(j, process->level).str()] = process->at_index(j).values;
    }
    root["process"] = ordered_json{{"level", process->level}, {"values", std::move(values)}};
  }
  return root.dump(2) + "\n";
}

void save_instance(const std::string& path, const FiniteFilteredSpace& space,
                   const AdaptedProcess* process) {
  write_text_file(path, instance_to_json(space, process));
}

std::string ui_diagnostics_to_csv(const UIDiagnostics& diag) {
  std::string out = "level,c,tail_mass,prob_tau_lt_1,lhs_eq1,rhs_eq1,markov_bound\n";
  for (const auto& row : diag.rows) {
    out += std::to_string(row.level);
    out += ',';
    out += format_double(row.threshold);
    out += ',';
    out += format_double(row.tail_mass);
    out += ',';
    out += format_double(row.prob_tau_lt_1);
    out += ',';
    out += format_double(row.lhs);
    out += ',';
    out += format_double(row.rhs);
    out += ',';
    out += format_double(row.markov_bound);
    out += '\n';
  }
  return out;
}

std::string convergence_curve_to_csv(const ConvergenceCurve& curve) {
  std::string out = "depth,t_or_tau,l1_gap_A,l1_gap_M1,mean_gap_at_tau,per_atom_bound\n";
  for (const auto& row : curve.rows) {
    out += std::to_string(row.depth);
    out += ',';
    out += row.target;
    out += ',';
    out += format_double(row.l1_gap_a);
    out += ',';
    out += format_double(row.l1_gap_m1);
    out += ',';
    out += format_double(row.mean_gap_at_tau);
    out += ',';
    out += format_double(row.per_atom_bound);
    out += '\n';
  }
  return out;
}

std::string komlos_report_to_json(const KomlosExtraction& extraction) {
  ordered_json root;
  root["sup_tail_inf"] = extraction.report.sup_tail_inf;
  root["stages_run"] = extraction.report.stages_run;
  root["stages_skipped"] = extraction.report.stages_skipped;
  ordered_json entries = ordered_json::array();
  for (std::size_t n = 0; n < extraction.report.entries.size(); ++n) {
    const auto& e = extraction.report.entries[n];
    ordered_json weights = ordered_json::array();
    const ConvexWeights& w = extraction.weights[n];
    for (std::size_t k = 0; k < w.weights.size(); ++k) {
      weights.push_back({w.start + static_cast<int>(k) + 1, w.weights[k]});
    }
    entries.push_back({{"n", e.n},
                       {"norm", e.norm},
                       {"tail_inf", e.tail_inf},
                       {"certificate_gap", e.certificate_gap},
                       {"weights", std::move(weights)}});
  }
  root["entries"] = std::move(entries);
  ordered_json distances = ordered_json::array();
  for (const auto& row : extraction.report.pairwise_l1) distances.push_back(row);
  root["pairwise_l1"] = std::move(distances);
  return root.dump(2) + "\n";
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << content;
  if (!out) throw std::runtime_error(path + ": write failed");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": cannot open file");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace dmlab
