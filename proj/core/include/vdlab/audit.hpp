#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vdlab/hamiltonian.hpp"

namespace vdlab {

struct SampleSpec {
  int x_grid = 64;          ///< x drawn from a uniform lattice with this many nodes per axis
  double p_radius = 10.0;   ///< covectors drawn from [-p_radius, p_radius]^n
  double u_range = 2.0;     ///< u drawn from [-u_range, u_range]
  int samples = 10000;
  std::uint64_t seed = 1;
  bool audit_h6 = false;
};

struct AuditEntry {
  std::string name;  ///< "alpha", "H1" ... "H6"
  bool pass = false;
  double margin = 0.0;  ///< worst sampled margin; negative means violated
  std::map<std::string, double> fitted;
  std::string witness;  ///< first violating sample, empty on PASS
};

struct AuditReport {
  std::string model_id;
  std::vector<AuditEntry> entries;

  bool all_pass() const;
  /// Throws std::out_of_range for an assumption that was not audited.
  const AuditEntry& entry(const std::string& name) const;
};

/// Sampled check of the structural assumptions (H1)-(H5), plus (H6) when requested.
/// Violations are reported, never thrown.
AuditReport audit_assumptions(const HamiltonianModel& model, const SampleSpec& spec);

}  // namespace vdlab
