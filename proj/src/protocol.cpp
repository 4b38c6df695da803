#include "adkrr/protocol.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <functional>
#include <limits>
#include <sstream>
#include <thread>
#include <unordered_set>

namespace adkrr {

// ---------------------------------------------------------------------------
// Ledger
// ---------------------------------------------------------------------------

void Ledger::record(int step, std::string kind, int from, int to,
                    std::shared_ptr<const std::vector<double>> payload) {
  LedgerEntry entry;
  entry.step = step;
  entry.kind = std::move(kind);
  entry.from = from;
  entry.to = to;
  entry.value_count = payload ? payload->size() : 0;
  entry.byte_count = entry.value_count * sizeof(double);
  entry.payload = std::move(payload);
  entries_.push_back(std::move(entry));
}

size_t Ledger::total_values() const {
  size_t total = 0;
  for (const auto& e : entries_) total += e.value_count;
  return total;
}

size_t Ledger::total_bytes() const {
  size_t total = 0;
  for (const auto& e : entries_) total += e.byte_count;
  return total;
}

size_t Ledger::values_in_step(int step) const {
  size_t total = 0;
  for (const auto& e : entries_)
    if (e.step == step) total += e.value_count;
  return total;
}

size_t Ledger::messages_in_step(int step) const {
  size_t total = 0;
  for (const auto& e : entries_)
    if (e.step == step) ++total;
  return total;
}

std::string Ledger::to_csv() const {
  std::ostringstream out;
  out << "step,kind,from,to,values,bytes\n";
  for (const auto& e : entries_) {
    out << e.step << ',' << e.kind << ','
        << (e.from == kCoordinator ? std::string("coordinator") : std::to_string(e.from)) << ','
        << (e.to == kCoordinator ? std::string("coordinator") : std::to_string(e.to)) << ','
        << e.value_count << ',' << e.byte_count << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Centers
// ---------------------------------------------------------------------------

double halton_radical_inverse(int base, long index) {
  if (base < 2) throw std::invalid_argument("halton_radical_inverse: base must be >= 2");
  if (index < 0) throw std::invalid_argument("halton_radical_inverse: index must be >= 0");
  double f = 1.0, r = 0.0;
  while (index > 0) {
    f /= base;
    r += f * static_cast<double>(index % base);
    index /= base;
  }
  return r;
}

Matrix draw_centers(CenterScheme scheme, int count, const Domain& domain, uint64_t seed) {
  if (count < 1) throw std::invalid_argument("draw_centers: count must be >= 1");
  static constexpr int primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29};
  if (scheme == CenterScheme::Halton && domain.dim > 10)
    throw std::invalid_argument("draw_centers: halton scheme supports up to 10 dimensions");

  Matrix centers(count, domain.dim);
  switch (scheme) {
    case CenterScheme::IidUniform: {
      Rng rng(seed);
      for (int i = 0; i < count; ++i)
        for (int q = 0; q < domain.dim; ++q) centers(i, q) = rng.uniform(domain.lo, domain.hi);
      break;
    }
    case CenterScheme::Halton: {
      for (int i = 0; i < count; ++i)
        for (int q = 0; q < domain.dim; ++q)
          centers(i, q) =
              domain.lo + (domain.hi - domain.lo) * halton_radical_inverse(primes[q], i + 1);
      break;
    }
    case CenterScheme::OwnData:
      throw std::invalid_argument("draw_centers: own-data centers are resolved inside the agent");
  }
  return centers;
}

// ---------------------------------------------------------------------------
// Agent
// ---------------------------------------------------------------------------

Agent::Agent(int id, LocalDataset data, const KernelSpec& kernel)
    : id_(id), data_(std::move(data)), kernel_(kernel) {
  if (data_.n() < 1) throw std::invalid_argument("Agent: empty dataset");
  if (data_.X.rows() != data_.y.size())
    throw std::invalid_argument("Agent: input/label count mismatch");
  gram_ = gram_matrix(kernel_, data_.X, data_.X);
}

LocalUpload Agent::local_round(const CenterBroadcast& broadcast, double b, MuMode mu_mode,
                               double mu_factor) {
  k_cap_ = broadcast.k_cap;
  const Ladder ladder{b, k_cap_};
  models_ = std::make_unique<LocalModelSet>(LocalModelSet::fit(gram_, data_.y, ladder));

  if (broadcast.scheme == CenterScheme::OwnData) {
    cross_gram_ = gram_;
    center_gram_ = gram_;
  } else {
    cross_gram_ = gram_matrix(kernel_, data_.X, broadcast.centers);
    center_gram_ = gram_matrix(kernel_, broadcast.centers, broadcast.centers);
  }

  mu_ = mu_for_agent(data_.n(), b, kernel_.kappa(), mu_mode, mu_factor);
  LocalApproxFitter fitter(cross_gram_, center_gram_, mu_);
  fit_used_jitter_ = fitter.used_jitter();

  LocalUpload upload;
  upload.w.resize(k_cap_ - 1);
  upload.coeffs.resize(k_cap_ - 1, center_gram_.rows());
  for (int k = 2; k <= k_cap_; ++k) {
    upload.w[k - 2] = models_->w_value(k);
    upload.coeffs.row(k - 2) = fitter.fit(models_->difference_values(k)).transpose();
  }
  return upload;
}

SelectionReport Agent::selection_round(const GlobalBroadcast& broadcast, double c_lp) {
  if (!models_) throw protocol_error("Agent: selection round before the local round");
  if (broadcast.coeffs.rows() != k_cap_ - 1 || broadcast.w_bar.size() != k_cap_ - 1)
    throw protocol_error("Agent: global broadcast shape mismatch");
  const Ladder ladder{models_->ladder().b, k_cap_};

  // batched seminorms of the global rows against this agent's data
  const Matrix data_values = cross_gram_ * broadcast.coeffs.transpose();   // n x (K*-1)
  const Matrix rkhs_prod = center_gram_ * broadcast.coeffs.transpose();   // L x (K*-1)
  const double n = static_cast<double>(data_.n());

  std::vector<double> seminorms(k_cap_ - 1), thresholds(k_cap_ - 1);
  for (int k = 2; k <= k_cap_; ++k) {
    const double data_part = data_values.col(k - 2).squaredNorm() / n;
    const double rkhs_part = broadcast.coeffs.row(k - 2).dot(rkhs_prod.col(k - 2));
    seminorms[k - 2] = data_part + ladder.lambda(k) * rkhs_part;
    thresholds[k - 2] = threshold_at(k, c_lp, broadcast.w_bar[k - 2], ladder);
  }
  selection_ = select_with_trace(seminorms, thresholds, ladder);
  return SelectionReport{selection_.lambda_star};
}

PredictionRow Agent::prediction_round(const SelectionBroadcast& broadcast,
                                      const Eigen::Ref<const Matrix>& queries) const {
  if (!models_) throw protocol_error("Agent: prediction round before the local round");
  const int m = static_cast<int>(broadcast.lambdas.size());
  const Matrix query_gram = gram_matrix(kernel_, queries, data_.X);  // Q x n

  PredictionRow row;
  row.values.resize(m, queries.rows());
  const double b = models_->ladder().b;
  for (int j = 0; j < m; ++j) {
    const int k = static_cast<int>(std::llround(1.0 / (broadcast.lambdas[j] * b)));
    row.values.row(j) = (query_gram * models_->coefficients(k)).transpose();
  }
  return row;
}

const LocalModelSet& Agent::models() const {
  if (!models_) throw protocol_error("Agent: models not fitted yet");
  return *models_;
}

// ---------------------------------------------------------------------------
// Coordinator
// ---------------------------------------------------------------------------

CenterBroadcast Coordinator::setup(const std::vector<SizeReport>& sizes,
                                   const ProtocolOptions& options, const Domain& domain,
                                   double kappa) {
  if (sizes.empty()) throw protocol_error("Coordinator: no agents");
  sizes_.clear();
  total_ = 0;
  long max_n = 0;
  int k_cap = std::numeric_limits<int>::max();
  for (const auto& report : sizes) {
    if (report.n < 1) throw protocol_error("Coordinator: agent reported an empty dataset");
    sizes_.push_back(report.n);
    total_ += report.n;
    max_n = std::max(max_n, report.n);
    k_cap = std::min(k_cap, ladder_cap(report.n, options.b, kappa, options.cap_mode,
                                       options.k_min));
  }
  if (k_cap < 2) {
    throw config_error(
        "ladder cap K* = " + std::to_string(k_cap) +
        " < 2; the theoretical cap is vacuous at this sample size -- switch the cap mode to "
        "practical with k_min >= 2");
  }
  k_cap_ = k_cap;

  CenterBroadcast broadcast;
  broadcast.k_cap = k_cap;
  broadcast.scheme = options.center_scheme;
  if (options.center_scheme == CenterScheme::OwnData) {
    if (sizes.size() != 1)
      throw config_error("own-data centers are a single-agent diagnostic mode (m must be 1)");
    return broadcast;
  }
  const int L = options.num_centers > 0 ? options.num_centers : static_cast<int>(max_n);
  if (L < max_n)
    throw protocol_error("center count L = " + std::to_string(L) +
                         " violates L >= max_j |D_j| = " + std::to_string(max_n));
  broadcast.centers = draw_centers(options.center_scheme, L, domain, options.center_seed);
  return broadcast;
}

GlobalBroadcast Coordinator::synthesize(const std::vector<LocalUpload>& uploads) {
  if (uploads.size() != sizes_.size())
    throw protocol_error("Coordinator: expected " + std::to_string(sizes_.size()) +
                         " uploads, got " + std::to_string(uploads.size()));
  std::vector<AgentUpload> parts;
  parts.reserve(uploads.size());
  for (size_t j = 0; j < uploads.size(); ++j) {
    if (uploads[j].coeffs.rows() == 0)
      throw protocol_error("Coordinator: missing upload from agent " + std::to_string(j));
    parts.push_back({uploads[j].coeffs, uploads[j].w, sizes_[j]});
  }
  global_ = synthesize_global(parts, total_);
  return GlobalBroadcast{global_.w_bar, global_.coeffs};
}

SelectionBroadcast Coordinator::collect_selections(const std::vector<SelectionReport>& reports) {
  if (reports.size() != sizes_.size())
    throw protocol_error("Coordinator: selection reports incomplete");
  lambdas_.resize(static_cast<Eigen::Index>(reports.size()));
  for (size_t j = 0; j < reports.size(); ++j) lambdas_[static_cast<Eigen::Index>(j)] = reports[j].lambda_star;
  return SelectionBroadcast{lambdas_};
}

Vector Coordinator::combine_predictions(const std::vector<PredictionRow>& rows) const {
  if (rows.size() != sizes_.size()) throw protocol_error("Coordinator: prediction rows incomplete");
  const int m = static_cast<int>(sizes_.size());
  const auto q_count = rows.front().values.cols();
  Vector out = Vector::Zero(q_count);
  // f(x) = sum_j w_j sum_{j'} w_{j'} f_{D_{j'}, lambda*_j}(x)
  for (int owner = 0; owner < m; ++owner) {
    if (rows[owner].values.rows() != m || rows[owner].values.cols() != q_count)
      throw protocol_error("Coordinator: prediction row shape mismatch from agent " +
                           std::to_string(owner));
    const double w_owner = static_cast<double>(sizes_[owner]) / static_cast<double>(total_);
    for (int j = 0; j < m; ++j) {
      const double w_j = static_cast<double>(sizes_[j]) / static_cast<double>(total_);
      out += w_j * w_owner * rows[owner].values.row(j).transpose();
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// ProtocolRun
// ---------------------------------------------------------------------------

namespace {

std::shared_ptr<const std::vector<double>> pack(std::initializer_list<double> values) {
  return std::make_shared<const std::vector<double>>(values);
}

std::shared_ptr<const std::vector<double>> pack_center_broadcast(const CenterBroadcast& bc) {
  auto payload = std::make_shared<std::vector<double>>();
  payload->reserve(static_cast<size_t>(bc.centers.size()) + 1);
  for (Eigen::Index i = 0; i < bc.centers.rows(); ++i)
    for (Eigen::Index q = 0; q < bc.centers.cols(); ++q) payload->push_back(bc.centers(i, q));
  payload->push_back(static_cast<double>(bc.k_cap));
  return payload;
}

std::shared_ptr<const std::vector<double>> pack_upload(const Vector& w, const Matrix& coeffs) {
  auto payload = std::make_shared<std::vector<double>>();
  payload->reserve(static_cast<size_t>(w.size()) + static_cast<size_t>(coeffs.size()));
  for (Eigen::Index i = 0; i < w.size(); ++i) payload->push_back(w[i]);
  for (Eigen::Index i = 0; i < coeffs.rows(); ++i)
    for (Eigen::Index l = 0; l < coeffs.cols(); ++l) payload->push_back(coeffs(i, l));
  return payload;
}

std::shared_ptr<const std::vector<double>> pack_matrix(const Matrix& values) {
  auto payload = std::make_shared<std::vector<double>>();
  payload->reserve(static_cast<size_t>(values.size()));
  for (Eigen::Index i = 0; i < values.rows(); ++i)
    for (Eigen::Index j = 0; j < values.cols(); ++j) payload->push_back(values(i, j));
  return payload;
}

void parallel_over_agents(int count, int workers, const std::function<void(int)>& work) {
  const int threads = std::max(1, std::min(workers, count));
  if (threads == 1) {
    for (int j = 0; j < count; ++j) work(j);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (int j = next.fetch_add(1); j < count; j = next.fetch_add(1)) work(j);
    });
  for (auto& th : pool) th.join();
}

}  // namespace

ProtocolRun::ProtocolRun(const KernelSpec& kernel, std::vector<LocalDataset> datasets,
                         ProtocolOptions options)
    : kernel_(kernel), options_(options) {
  if (datasets.empty()) throw std::invalid_argument("ProtocolRun: at least one agent required");
  agents_.reserve(datasets.size());
  for (size_t j = 0; j < datasets.size(); ++j)
    agents_.push_back(std::make_unique<Agent>(static_cast<int>(j), std::move(datasets[j]), kernel_));
}

void ProtocolRun::run_selection() {
  const int m = agent_count();

  // Step 1: sizes up, centers and shared cap down.
  std::vector<SizeReport> sizes;
  sizes.reserve(m);
  for (int j = 0; j < m; ++j) {
    sizes.push_back(SizeReport{agents_[j]->size()});
    ledger_.record(1, "SizeReport", j, kCoordinator,
                   pack({static_cast<double>(agents_[j]->size())}));
  }
  const CenterBroadcast center_bc =
      coordinator_.setup(sizes, options_, kernel_.domain(), kernel_.kappa());
  ledger_.record(1, "CenterBroadcast", kCoordinator, kCoordinator, pack_center_broadcast(center_bc));

  // Step 2: local ladders and reduced-rank uploads.
  std::vector<LocalUpload> uploads(m);
  parallel_over_agents(m, options_.workers, [&](int j) {
    try {
      uploads[j] = agents_[j]->local_round(center_bc, options_.b, options_.mu_mode,
                                           options_.mu_factor);
    } catch (const std::exception& err) {
      throw std::runtime_error("agent " + std::to_string(j) + ": " + err.what());
    }
  });
  for (int j = 0; j < m; ++j)
    ledger_.record(2, "LocalUpload", j, kCoordinator, pack_upload(uploads[j].w, uploads[j].coeffs));

  // Step 3: synthesis, broadcast to every agent.
  const GlobalBroadcast global_bc = coordinator_.synthesize(uploads);
  {
    auto payload = pack_upload(global_bc.w_bar, global_bc.coeffs);
    for (int j = 0; j < m; ++j) ledger_.record(3, "GlobalBroadcast", kCoordinator, j, payload);
  }

  // Step 4: per-agent Lepskii scan, selections up, selected grid down.
  std::vector<SelectionReport> reports(m);
  parallel_over_agents(m, options_.workers, [&](int j) {
    reports[j] = agents_[j]->selection_round(global_bc, options_.c_lp);
  });
  for (int j = 0; j < m; ++j)
    ledger_.record(4, "SelectionReport", j, kCoordinator, pack({reports[j].lambda_star}));
  const SelectionBroadcast selection_bc = coordinator_.collect_selections(reports);
  {
    auto payload = std::make_shared<std::vector<double>>(
        selection_bc.lambdas.data(), selection_bc.lambdas.data() + selection_bc.lambdas.size());
    ledger_.record(4, "SelectionBroadcast", kCoordinator, kCoordinator, std::move(payload));
  }
  selected_ = true;
}

void ProtocolRun::force_common_selection(int k) {
  ensure_selected();
  if (k < 1 || k > coordinator_.k_cap())
    throw std::invalid_argument("force_common_selection: k outside the ladder");
  std::vector<SelectionReport> reports(agent_count(),
                                       SelectionReport{lambda_at(options_.b, k)});
  coordinator_.collect_selections(reports);
}

Vector ProtocolRun::predict(const Eigen::Ref<const Matrix>& queries) {
  ensure_selected();
  const int m = agent_count();
  // the broadcast assembled in step 4 (possibly overridden)
  const SelectionBroadcast bc{coordinator_.selected_lambdas()};

  std::vector<PredictionRow> rows(m);
  parallel_over_agents(m, options_.workers, [&](int j) {
    rows[j] = agents_[j]->prediction_round(bc, queries);
  });
  for (int j = 0; j < m; ++j)
    ledger_.record(5, "PredictionRow", j, kCoordinator, pack_matrix(rows[j].values));
  return coordinator_.combine_predictions(rows);
}

std::vector<int> ProtocolRun::k_stars() const {
  ensure_selected();
  const Vector& lambdas = coordinator_.selected_lambdas();
  std::vector<int> out(agent_count());
  for (int j = 0; j < agent_count(); ++j)
    out[j] = static_cast<int>(std::llround(1.0 / (lambdas[j] * options_.b)));
  return out;
}

std::vector<double> ProtocolRun::lambda_stars() const {
  ensure_selected();
  const Vector& lambdas = coordinator_.selected_lambdas();
  return std::vector<double>(lambdas.data(), lambdas.data() + lambdas.size());
}

void ProtocolRun::ensure_selected() const {
  if (!selected_) throw protocol_error("ProtocolRun: selection has not been run yet");
}

// ---------------------------------------------------------------------------
// Audit
// ---------------------------------------------------------------------------

namespace {

struct WindowKey {
  uint64_t a = 0, b = 0, c = 0;
  bool operator==(const WindowKey& other) const {
    return a == other.a && b == other.b && c == other.c;
  }
};

struct WindowHash {
  size_t operator()(const WindowKey& k) const {
    uint64_t h = k.a * 0x9e3779b97f4a7c15ULL;
    h ^= k.b + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    h ^= k.c + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return static_cast<size_t>(h);
  }
};

uint64_t bits_of(double v) {
  uint64_t u;
  std::memcpy(&u, &v, sizeof(u));
  return u;
}

WindowKey key_at(const double* data, int len) {
  WindowKey k;
  k.a = bits_of(data[0]);
  if (len > 1) k.b = bits_of(data[1]);
  if (len > 2) k.c = bits_of(data[2]);
  return k;
}

bool all_zero(const double* data, int len) {
  for (int i = 0; i < len; ++i)
    if (data[i] != 0.0) return false;
  return true;
}

}  // namespace

AuditReport audit_privacy(const std::vector<LedgerEntry>& entries,
                          const std::vector<LocalDataset>& private_data) {
  AuditReport report;

  // index every private contiguous window, keyed by window length
  std::unordered_set<WindowKey, WindowHash> windows[4];
  int min_len = 3;
  for (const auto& data : private_data) min_len = std::min(min_len, data.n());
  auto add_series = [&](const double* values, long count) {
    const int len = std::min<long>(3, count);
    for (long i = 0; i + len <= count; ++i)
      if (!all_zero(values + i, len)) windows[len].insert(key_at(values + i, len));
  };
  for (const auto& data : private_data) {
    for (Eigen::Index c = 0; c < data.X.cols(); ++c) {
      const Vector col = data.X.col(c);
      add_series(col.data(), col.size());
    }
    add_series(data.y.data(), data.y.size());
  }

  for (size_t idx = 0; idx < entries.size(); ++idx) {
    const auto& entry = entries[idx];
    const size_t payload_size = entry.payload ? entry.payload->size() : 0;
    if (payload_size != entry.value_count) {
      report.passed = false;
      std::ostringstream msg;
      msg << "step " << entry.step << " message " << entry.kind << " (entry " << idx
          << "): declared value count " << entry.value_count << " does not match payload size "
          << payload_size;
      report.violation = msg.str();
      break;
    }
    if (!entry.payload) continue;
    const auto& payload = *entry.payload;
    for (int len = min_len; len <= 3; ++len) {
      if (windows[len].empty()) continue;
      for (size_t i = 0; i + len <= payload.size(); ++i) {
        if (all_zero(payload.data() + i, len)) continue;
        if (windows[len].count(key_at(payload.data() + i, len))) {
          report.passed = false;
          std::ostringstream msg;
          msg << "step " << entry.step << " message " << entry.kind << " from "
              << (entry.from == kCoordinator ? std::string("coordinator")
                                             : "agent " + std::to_string(entry.from))
              << " (entry " << idx << ") reproduces raw sample values at payload offset " << i;
          report.violation = msg.str();
          break;
        }
      }
      if (!report.passed) break;
    }
    if (!report.passed) break;
  }

  // per-step traffic
  for (const auto& entry : entries) {
    auto it = std::find_if(report.per_step.begin(), report.per_step.end(),
                           [&](const StepTraffic& t) { return t.step == entry.step; });
    if (it == report.per_step.end()) {
      report.per_step.push_back({entry.step, 0, 0, 0});
      it = report.per_step.end() - 1;
    }
    it->messages += 1;
    it->values += entry.value_count;
    it->bytes += entry.byte_count;
  }
  std::sort(report.per_step.begin(), report.per_step.end(),
            [](const StepTraffic& a, const StepTraffic& b) { return a.step < b.step; });
  return report;
}

AuditReport audit_privacy(const Ledger& ledger, const std::vector<LocalDataset>& private_data) {
  return audit_privacy(ledger.entries(), private_data);
}

}  // namespace adkrr
