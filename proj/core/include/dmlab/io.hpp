#pragma once

#include <optional>
#include <stdexcept>
#include <string>

#include "dmlab/doob.hpp"
#include "dmlab/komlos.hpp"
#include "dmlab/limit.hpp"
#include "dmlab/processes.hpp"

namespace dmlab {

// Instance-file problem (malformed JSON, schema violation, or an invariant
// the loader rejects); the message carries the location of the first
// violation.
class SchemaError : public std::runtime_error {
 public:
  explicit SchemaError(const std::string& message) : std::runtime_error(message) {}
};

struct Instance {
  FiniteFilteredSpace space;
  std::optional<AdaptedProcess> process;
};

// {"atoms": [...], "probs": [...], "depth": N,
//  "partitions": {"j/2^n": [[atom indices]...], ...},
//  "process": {"level": n, "values": {"j/2^n": [...], ...}}}   (optional)
// Partition keys must cover every master-grid time; dyadic keys are
// canonicalized on load. Throws SchemaError on the first violation.
Instance load_instance(const std::string& path);
Instance parse_instance(const std::string& json_text);

std::string instance_to_json(const FiniteFilteredSpace& space,
                             const AdaptedProcess* process = nullptr);
void save_instance(const std::string& path, const FiniteFilteredSpace& space,
                   const AdaptedProcess* process = nullptr);

// 17 significant digits, round-trip exact.
std::string format_double(double x);

// Report writers. Layouts:
//   ui:          level,c,tail_mass,prob_tau_lt_1,lhs_eq1,rhs_eq1,markov_bound
//   convergence: depth,t_or_tau,l1_gap_A,l1_gap_M1,mean_gap_at_tau,per_atom_bound
std::string ui_diagnostics_to_csv(const UIDiagnostics& diag);
std::string convergence_curve_to_csv(const ConvergenceCurve& curve);
// Per-n records {n, norm, tail_inf, certificate_gap, weights: [[j, w]...]}.
std::string komlos_report_to_json(const KomlosExtraction& extraction);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace dmlab
