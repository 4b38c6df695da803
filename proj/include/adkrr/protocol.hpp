#pragma once

#include "adkrr/approx.hpp"
#include "adkrr/kernel.hpp"
#include "adkrr/krr.hpp"
#include "adkrr/lepskii.hpp"

#include <memory>
#include <string>
#include <vector>

namespace adkrr {

// ---------------------------------------------------------------------------
// Messages. Every payload that crosses the agent/coordinator boundary is one
// of these variants; none has a field capable of carrying raw sample pairs.
// ---------------------------------------------------------------------------

enum class CenterScheme { IidUniform, Halton, OwnData };

struct SizeReport {
  long n = 0;
};

struct CenterBroadcast {
  CenterScheme scheme = CenterScheme::IidUniform;
  Matrix centers;  // L x d; empty for OwnData (each agent substitutes its inputs)
  int k_cap = 0;   // shared ladder cap K*
};

struct LocalUpload {
  Vector w;       // (K*-1), entry k-2
  Matrix coeffs;  // (K*-1) x L
};

struct GlobalBroadcast {
  Vector w_bar;   // (K*-1)
  Matrix coeffs;  // (K*-1) x L
};

struct SelectionReport {
  double lambda_star = 0.0;
};

struct SelectionBroadcast {
  Vector lambdas;  // m entries
};

struct PredictionRow {
  Matrix values;  // m x Q: row j holds f_{D_{j'}, lambda*_j} at the queries
};

// ---------------------------------------------------------------------------
// Communication ledger
// ---------------------------------------------------------------------------

constexpr int kCoordinator = -1;

struct LedgerEntry {
  int step = 0;
  std::string kind;
  int from = kCoordinator;
  int to = kCoordinator;
  size_t value_count = 0;  // numeric values carried (floats and counts alike)
  size_t byte_count = 0;   // value_count * 8
  std::shared_ptr<const std::vector<double>> payload;  // shared across broadcast copies
};

class Ledger {
 public:
  void record(int step, std::string kind, int from, int to,
              std::shared_ptr<const std::vector<double>> payload);

  const std::vector<LedgerEntry>& entries() const { return entries_; }
  size_t total_values() const;
  size_t total_bytes() const;
  size_t values_in_step(int step) const;
  size_t messages_in_step(int step) const;

  /// CSV rows (step,kind,from,to,values,bytes), header included.
  std::string to_csv() const;

 private:
  std::vector<LedgerEntry> entries_;
};

// ---------------------------------------------------------------------------
// Protocol actors
// ---------------------------------------------------------------------------

struct ProtocolOptions {
  int num_centers = 0;  // 0: use max_j |D_j|
  CenterScheme center_scheme = CenterScheme::IidUniform;
  uint64_t center_seed = 0;
  double b = 1.0;
  CapMode cap_mode = CapMode::Practical;
  int k_min = 16;
  MuMode mu_mode = MuMode::Scaled;
  double mu_factor = 1e-8;
  double c_lp = 1.0;
  int workers = 1;  // per-agent parallelism inside a round
};

/// One local agent. The private dataset never leaves this object; the only
/// outputs are the protocol messages.
class Agent {
 public:
  Agent(int id, LocalDataset data, const KernelSpec& kernel);

  int id() const { return id_; }
  long size() const { return data_.n(); }

  /// Step 2: ladder solves, W values, reduced-rank fits of the ladder
  /// differences on the shared centers. The fitted models stay local.
  LocalUpload local_round(const CenterBroadcast& broadcast, double b, MuMode mu_mode,
                          double mu_factor);

  /// Step 4: Lepskii scan of the global approximation against this agent's
  /// own seminorm.
  SelectionReport selection_round(const GlobalBroadcast& broadcast, double c_lp);

  /// Step 5: this agent's row block of the prediction matrix.
  PredictionRow prediction_round(const SelectionBroadcast& broadcast,
                                 const Eigen::Ref<const Matrix>& queries) const;

  // Harness-side introspection (diagnostics and tests, never a message).
  const LocalModelSet& models() const;
  const SelectionResult& selection() const { return selection_; }
  double mu() const { return mu_; }
  bool fit_used_jitter() const { return fit_used_jitter_; }

 private:
  int id_;
  LocalDataset data_;
  KernelSpec kernel_;
  Matrix gram_;
  std::unique_ptr<LocalModelSet> models_;
  Matrix cross_gram_;   // n x L against the shared centers
  Matrix center_gram_;  // L x L
  double mu_ = 0.0;
  bool fit_used_jitter_ = false;
  int k_cap_ = 0;
  SelectionResult selection_;
};

/// The global agent: collects sizes, draws centers, synthesizes uploads and
/// assembles the final double-averaged prediction.
class Coordinator {
 public:
  CenterBroadcast setup(const std::vector<SizeReport>& sizes, const ProtocolOptions& options,
                        const Domain& domain, double kappa);
  GlobalBroadcast synthesize(const std::vector<LocalUpload>& uploads);
  SelectionBroadcast collect_selections(const std::vector<SelectionReport>& reports);
  Vector combine_predictions(const std::vector<PredictionRow>& rows) const;

  int k_cap() const { return k_cap_; }
  long total() const { return total_; }
  const std::vector<long>& sizes() const { return sizes_; }
  const GlobalApprox& global_approx() const { return global_; }
  const Vector& selected_lambdas() const { return lambdas_; }

 private:
  std::vector<long> sizes_;
  long total_ = 0;
  int k_cap_ = 0;
  GlobalApprox global_;
  Vector lambdas_;
};

/// Synchronous in-process run of the five protocol steps over m agents.
/// Rounds are barriers; within a round the agent computations may execute on
/// a worker pool; ordering of recorded messages is by agent index.
class ProtocolRun {
 public:
  ProtocolRun(const KernelSpec& kernel, std::vector<LocalDataset> datasets,
              ProtocolOptions options);

  /// Steps 1-4.
  void run_selection();

  /// Replace every agent's selection with ladder index k (fixed-lambda
  /// operation; used for the single-average consistency checks).
  void force_common_selection(int k);

  /// Step 5 at a batch of query points.
  Vector predict(const Eigen::Ref<const Matrix>& queries);

  int agent_count() const { return static_cast<int>(agents_.size()); }
  int k_cap() const { return coordinator_.k_cap(); }
  double b() const { return options_.b; }
  std::vector<int> k_stars() const;
  std::vector<double> lambda_stars() const;
  const Agent& agent(int j) const { return *agents_.at(j); }
  const Coordinator& coordinator() const { return coordinator_; }
  const Ledger& ledger() const { return ledger_; }
  Ledger& mutable_ledger() { return ledger_; }

 private:
  void ensure_selected() const;

  KernelSpec kernel_;
  ProtocolOptions options_;
  std::vector<std::unique_ptr<Agent>> agents_;
  Coordinator coordinator_;
  Ledger ledger_;
  bool selected_ = false;
};

// ---------------------------------------------------------------------------
// Centers and audit
// ---------------------------------------------------------------------------

/// Radical inverse of index in the given base (Halton coordinate).
double halton_radical_inverse(int base, long index);

/// L points in the domain box: seeded iid uniform or Halton (one prime base
/// per dimension, indices starting at 1).
Matrix draw_centers(CenterScheme scheme, int count, const Domain& domain, uint64_t seed);

struct StepTraffic {
  int step = 0;
  size_t messages = 0;
  size_t values = 0;
  size_t bytes = 0;
};

struct AuditReport {
  bool passed = true;
  std::string violation;
  std::vector<StepTraffic> per_step;
};

/// Scans every recorded payload for contiguous runs that reproduce raw
/// sample coordinates or labels of any agent (bitwise, all-zero windows
/// excluded since zeros carry no sample information), and tallies per-step
/// traffic. Fails with the offending message named.
AuditReport audit_privacy(const std::vector<LedgerEntry>& entries,
                          const std::vector<LocalDataset>& private_data);
AuditReport audit_privacy(const Ledger& ledger, const std::vector<LocalDataset>& private_data);

}  // namespace adkrr
