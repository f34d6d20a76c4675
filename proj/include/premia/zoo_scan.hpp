#ifndef PREMIA_ZOO_SCAN_HPP
#define PREMIA_ZOO_SCAN_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "premia/panel.hpp"

namespace premia {

/// Sufficient statistics over the T rows, computed once; any factor
/// subset's first-pass moments are then assembled by sub-matrix algebra.
struct MomentStore {
  long T = 0;
  Eigen::VectorXd rbar;  // N
  Eigen::VectorXd fbar;  // M
  Eigen::MatrixXd s_rf;  // N x M, sum R~ F~'
  Eigen::MatrixXd s_ff;  // M x M
  Eigen::MatrixXd s_rr;  // N x N
  ZeroBetaMode mode = ZeroBetaMode::imposed_zero;  // already applied to returns

  long N() const { return rbar.size(); }
  long M() const { return fbar.size(); }
};

MomentStore precompute_moments(const Eigen::MatrixXd& returns, const Eigen::MatrixXd& factors);

/// Applies the dataset's zero-beta convention first (differencing against
/// the last asset under intercept_estimated).
MomentStore precompute_moments(const AlignedDataset& ds);

constexpr std::uint8_t kScanMisspecified5pct = 1;  // p_j <= 0.05
constexpr std::uint8_t kScanWeak5pct = 2;          // p_is > 0.05
constexpr std::uint8_t kScanDegenerate = 4;        // singular omega or qff

struct ScanRecord {
  std::vector<std::uint32_t> subset;  // sorted factor indices
  double j = 0.0;
  double is = 0.0;
  double p_j = 1.0;
  double p_is = 1.0;
  std::uint8_t flags = 0;
};

// --- colexicographic subset enumeration ---------------------------------

std::uint64_t binomial(unsigned n, unsigned k);

/// Subset of size k with colexicographic rank r (0-based indices).
std::vector<std::uint32_t> colex_unrank(std::uint64_t rank, int k);
std::uint64_t colex_rank(const std::vector<std::uint32_t>& subset);

/// Advance a subset to its colex successor (indices bounded by m).
/// Returns false past the last subset.
bool colex_next(std::vector<std::uint32_t>& subset, std::uint32_t m);

// -------------------------------------------------------------------------

/// J and IS for one assembled subset.
ScanRecord evaluate_subset(const MomentStore& store, const std::vector<std::uint32_t>& subset);

/// Scan the colex rank range [rank_begin, rank_end) of the C(M,k)
/// subsets, in order. The sink is called from a single thread.
void scan_range(const MomentStore& store, int k, std::uint64_t rank_begin,
                std::uint64_t rank_end, const std::function<void(const ScanRecord&)>& sink);

/// Full scan of one shard (shard_index of shard_count equal rank slices),
/// parallelized internally, records returned in colex order.
std::vector<ScanRecord> scan(const MomentStore& store, int k, unsigned shard_index = 0,
                             unsigned shard_count = 1);

struct ScanSummary {
  int k = 0;
  std::uint64_t n_models = 0;      // C(M, k)
  std::uint64_t n_records = 0;     // records seen
  std::uint64_t n_degenerate = 0;  // flagged, excluded from percentages
  double pct_misspecified = 0.0;
  double pct_weak = 0.0;
  int bins = 60;
  double is_min = 0.0, is_max = 0.0, j_min = 0.0, j_max = 0.0;
  std::vector<std::uint64_t> hist;  // bins x bins counts, row = IS bin, col = J bin

  std::uint64_t hist_at(int is_bin, int j_bin) const {
    return hist[static_cast<std::size_t>(is_bin) * static_cast<std::size_t>(bins) +
                static_cast<std::size_t>(j_bin)];
  }
};

ScanSummary summarize(const std::vector<ScanRecord>& records, int k, std::uint64_t n_models,
                      int bins = 60);

// --- shard file I/O -------------------------------------------------------
// Little-endian. Header: magic "ZSCN", version u32, k u32, count u64
// (count written on close). Per record: k x u32 subset, f64 J, f64 IS,
// f64 p_J, f64 p_IS, u8 flags.

class ShardWriter {
 public:
  ShardWriter(const std::string& path, int k);
  ~ShardWriter();
  void write(const ScanRecord& rec);
  void close();

 private:
  struct Impl;
  Impl* impl_;
};

std::vector<ScanRecord> read_shard(const std::string& path, int* k_out = nullptr);

}  // namespace premia

#endif
