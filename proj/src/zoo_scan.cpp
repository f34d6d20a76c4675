#include "premia/zoo_scan.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>

#include "premia/chi_square.hpp"
#include "premia/errors.hpp"
#include "premia/parallel.hpp"
#include "premia/pencil.hpp"

namespace premia {

MomentStore precompute_moments(const Eigen::MatrixXd& returns, const Eigen::MatrixXd& factors) {
  if (returns.rows() != factors.rows())
    throw ValidationError("precompute_moments: panels must share T");
  MomentStore st;
  st.T = returns.rows();
  st.rbar = returns.colwise().mean();
  st.fbar = factors.colwise().mean();
  const Eigen::MatrixXd Rd = returns.rowwise() - st.rbar.transpose();
  const Eigen::MatrixXd Fd = factors.rowwise() - st.fbar.transpose();
  st.s_rf = Rd.transpose() * Fd;
  st.s_ff = Fd.transpose() * Fd;
  st.s_rr = Rd.transpose() * Rd;
  return st;
}

MomentStore precompute_moments(const AlignedDataset& ds) {
  if (ds.zero_beta_mode == ZeroBetaMode::intercept_estimated) {
    const long N = ds.N();
    if (N < 2) throw ValidationError("intercept_estimated scan needs at least 2 assets");
    const Eigen::MatrixXd diffed =
        ds.returns.leftCols(N - 1).colwise() - ds.returns.col(N - 1);
    MomentStore st = precompute_moments(diffed, ds.factors);
    st.mode = ZeroBetaMode::intercept_estimated;
    return st;
  }
  MomentStore st = precompute_moments(ds.returns, ds.factors);
  st.mode = ds.zero_beta_mode;
  return st;
}

std::uint64_t binomial(unsigned n, unsigned k) {
  if (k > n) return 0;
  if (k > n - k) k = n - k;
  unsigned __int128 c = 1;
  for (unsigned i = 1; i <= k; ++i) {
    c = c * (n - k + i) / i;
    if (c > std::numeric_limits<std::uint64_t>::max())
      throw ValidationError("binomial overflow");
  }
  return static_cast<std::uint64_t>(c);
}

std::vector<std::uint32_t> colex_unrank(std::uint64_t rank, int k) {
  std::vector<std::uint32_t> subset(static_cast<std::size_t>(k));
  for (int i = k; i >= 1; --i) {
    // largest c with C(c, i) <= rank
    std::uint32_t c = static_cast<std::uint32_t>(i) - 1;
    std::uint64_t binom = 0;  // C(i-1, i) = 0
    for (;;) {
      const std::uint64_t next = binomial(c + 1, static_cast<unsigned>(i));
      if (next > rank) break;
      ++c;
      binom = next;
    }
    subset[static_cast<std::size_t>(i - 1)] = c;
    rank -= binom;
  }
  return subset;
}

std::uint64_t colex_rank(const std::vector<std::uint32_t>& subset) {
  std::uint64_t rank = 0;
  for (std::size_t i = 0; i < subset.size(); ++i)
    rank += binomial(subset[i], static_cast<unsigned>(i + 1));
  return rank;
}

bool colex_next(std::vector<std::uint32_t>& subset, std::uint32_t m) {
  const std::size_t k = subset.size();
  for (std::size_t i = 0; i < k; ++i) {
    const std::uint32_t limit = (i + 1 < k) ? subset[i + 1] : m;
    if (subset[i] + 1 < limit) {
      ++subset[i];
      for (std::size_t j = 0; j < i; ++j) subset[j] = static_cast<std::uint32_t>(j);
      return true;
    }
  }
  return false;
}

ScanRecord evaluate_subset(const MomentStore& store, const std::vector<std::uint32_t>& subset) {
  const int k = static_cast<int>(subset.size());
  const long N = store.N();
  const double T = static_cast<double>(store.T);

  ScanRecord rec;
  rec.subset = subset;

  Eigen::MatrixXd sff_s(k, k);
  Eigen::MatrixXd srf_s(N, k);
  for (int a = 0; a < k; ++a) {
    srf_s.col(a) = store.s_rf.col(subset[static_cast<std::size_t>(a)]);
    for (int b = 0; b < k; ++b)
      sff_s(a, b) = store.s_ff(subset[static_cast<std::size_t>(a)],
                               subset[static_cast<std::size_t>(b)]);
  }
  const Eigen::MatrixXd qff = sff_s / T;

  const double nan = std::numeric_limits<double>::quiet_NaN();
  {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(qff);
    if (!(es.eigenvalues().minCoeff() > 1e-12 * es.eigenvalues().maxCoeff())) {
      rec.flags = kScanDegenerate;
      rec.j = rec.is = rec.p_j = rec.p_is = nan;
      return rec;
    }
  }

  const Eigen::MatrixXd beta = sff_s.ldlt().solve(srf_s.transpose()).transpose();
  Eigen::MatrixXd omega = (store.s_rr - beta * sff_s * beta.transpose()) / T;
  omega = 0.5 * (omega + omega.transpose());

  Eigen::LLT<Eigen::MatrixXd> omega_llt(omega);
  {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(omega);
    const double lmin = es.eigenvalues().minCoeff();
    const double lmax = es.eigenvalues().maxCoeff();
    if (!(lmin > 0.0) || lmax / lmin > 1e12 || omega_llt.info() != Eigen::Success) {
      rec.flags = kScanDegenerate;
      rec.j = rec.is = rec.p_j = rec.p_is = nan;
      return rec;
    }
  }

  const Eigen::MatrixXd qff_inv = qff.inverse();

  // J: bordered pencil on (rbar : beta)
  Eigen::MatrixXd G(N, k + 1);
  G.col(0) = store.rbar;
  G.rightCols(k) = beta;
  Eigen::MatrixXd MJ = G.transpose() * omega_llt.solve(G);
  MJ = 0.5 * (MJ + MJ.transpose());
  Eigen::MatrixXd DJ = Eigen::MatrixXd::Zero(k + 1, k + 1);
  DJ(0, 0) = 1.0;
  DJ.bottomRightCorner(k, k) = qff_inv;

  // IS: pencil on beta alone
  Eigen::MatrixXd MI = beta.transpose() * omega_llt.solve(beta);
  MI = 0.5 * (MI + MI.transpose());

  const EigenSolution jsol = solve_pencil(MJ, DJ);
  const EigenSolution isol = solve_pencil(MI, qff_inv);

  rec.j = T * jsol.smallest_root;
  rec.is = T * isol.smallest_root;
  const int df_j = static_cast<int>(N) - k;
  const int df_is = df_j + 1;
  rec.p_j = chi2_pvalue(rec.j, df_j);
  rec.p_is = chi2_pvalue(rec.is, df_is);
  if (rec.p_j <= 0.05) rec.flags |= kScanMisspecified5pct;
  if (rec.p_is > 0.05) rec.flags |= kScanWeak5pct;
  return rec;
}

void scan_range(const MomentStore& store, int k, std::uint64_t rank_begin,
                std::uint64_t rank_end, const std::function<void(const ScanRecord&)>& sink) {
  if (rank_begin >= rank_end) return;
  std::vector<std::uint32_t> subset = colex_unrank(rank_begin, k);
  const auto m = static_cast<std::uint32_t>(store.M());
  for (std::uint64_t r = rank_begin; r < rank_end; ++r) {
    sink(evaluate_subset(store, subset));
    if (r + 1 < rank_end && !colex_next(subset, m))
      throw ValidationError("scan_range: rank range exceeds C(M,k)");
  }
}

std::vector<ScanRecord> scan(const MomentStore& store, int k, unsigned shard_index,
                             unsigned shard_count) {
  const long M = store.M();
  const long N = store.N();
  if (k < 1 || k > std::min<long>(M, N - 1))
    throw ValidationError("scan: need 1 <= k <= min(M, N-1)");
  if (shard_count == 0 || shard_index >= shard_count)
    throw ValidationError("scan: invalid shard index");

  const std::uint64_t total = binomial(static_cast<unsigned>(M), static_cast<unsigned>(k));
  const std::uint64_t shard_size = (total + shard_count - 1) / shard_count;
  const std::uint64_t begin = std::min<std::uint64_t>(shard_index * shard_size, total);
  const std::uint64_t end = std::min<std::uint64_t>(begin + shard_size, total);
  const std::uint64_t n = end - begin;

  std::vector<ScanRecord> records(n);
  parallel_for(n, [&](std::uint64_t lo, std::uint64_t hi) {
    std::uint64_t idx = lo;
    scan_range(store, k, begin + lo, begin + hi,
               [&](const ScanRecord& rec) { records[idx++] = rec; });
  });
  return records;
}

ScanSummary summarize(const std::vector<ScanRecord>& records, int k, std::uint64_t n_models,
                      int bins) {
  if (records.empty()) throw ValidationError("summarize: empty record stream");
  if (bins < 1) throw ValidationError("summarize: bins must be >= 1");

  ScanSummary s;
  s.k = k;
  s.n_models = n_models;
  s.n_records = records.size();
  s.bins = bins;

  std::uint64_t misspecified = 0, weak = 0, valid = 0;
  double is_min = std::numeric_limits<double>::infinity(), is_max = -is_min;
  double j_min = is_min, j_max = -is_min;
  for (const auto& r : records) {
    if (r.flags & kScanDegenerate) {
      ++s.n_degenerate;
      continue;
    }
    ++valid;
    if (r.flags & kScanMisspecified5pct) ++misspecified;
    if (r.flags & kScanWeak5pct) ++weak;
    is_min = std::min(is_min, r.is);
    is_max = std::max(is_max, r.is);
    j_min = std::min(j_min, r.j);
    j_max = std::max(j_max, r.j);
  }
  if (valid == 0) throw ValidationError("summarize: all records degenerate");
  s.pct_misspecified = 100.0 * static_cast<double>(misspecified) / static_cast<double>(valid);
  s.pct_weak = 100.0 * static_cast<double>(weak) / static_cast<double>(valid);

  s.is_min = is_min;
  s.is_max = is_max;
  s.j_min = j_min;
  s.j_max = j_max;
  s.hist.assign(static_cast<std::size_t>(bins) * static_cast<std::size_t>(bins), 0);
  const double is_span = is_max > is_min ? is_max - is_min : 1.0;
  const double j_span = j_max > j_min ? j_max - j_min : 1.0;
  for (const auto& r : records) {
    if (r.flags & kScanDegenerate) continue;
    int bi = static_cast<int>((r.is - is_min) / is_span * bins);
    int bj = static_cast<int>((r.j - j_min) / j_span * bins);
    bi = std::clamp(bi, 0, bins - 1);
    bj = std::clamp(bj, 0, bins - 1);
    ++s.hist[static_cast<std::size_t>(bi) * static_cast<std::size_t>(bins) +
             static_cast<std::size_t>(bj)];
  }
  return s;
}

// --- shard file I/O -------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'Z', 'S', 'C', 'N'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::FILE* f, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  std::fwrite(b, 1, 4, f);
}

void put_u64(std::FILE* f, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  std::fwrite(b, 1, 8, f);
}

void put_f64(std::FILE* f, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(f, bits);
}

std::uint32_t get_u32(std::FILE* f) {
  unsigned char b[4];
  if (std::fread(b, 1, 4, f) != 4) throw ValidationError("shard file truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::FILE* f) {
  unsigned char b[8];
  if (std::fread(b, 1, 8, f) != 8) throw ValidationError("shard file truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::FILE* f) {
  const std::uint64_t bits = get_u64(f);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace

struct ShardWriter::Impl {
  std::FILE* file = nullptr;
  int k = 0;
  std::uint64_t count = 0;
  std::string path;
};

ShardWriter::ShardWriter(const std::string& path, int k) : impl_(new Impl) {
  impl_->file = std::fopen(path.c_str(), "wb");
  impl_->k = k;
  impl_->path = path;
  if (!impl_->file) throw ValidationError("cannot open shard file for writing: " + path);
  std::fwrite(kMagic, 1, 4, impl_->file);
  put_u32(impl_->file, kVersion);
  put_u32(impl_->file, static_cast<std::uint32_t>(k));
  put_u64(impl_->file, 0);  // count, patched on close
}

ShardWriter::~ShardWriter() {
  close();
  delete impl_;
}

void ShardWriter::write(const ScanRecord& rec) {
  if (!impl_->file) throw ValidationError("shard writer already closed");
  if (static_cast<int>(rec.subset.size()) != impl_->k)
    throw ValidationError("shard writer: record k mismatch");
  for (std::uint32_t s : rec.subset) put_u32(impl_->file, s);
  put_f64(impl_->file, rec.j);
  put_f64(impl_->file, rec.is);
  put_f64(impl_->file, rec.p_j);
  put_f64(impl_->file, rec.p_is);
  std::fputc(rec.flags, impl_->file);
  ++impl_->count;
}

void ShardWriter::close() {
  if (!impl_->file) return;
  std::fseek(impl_->file, 12, SEEK_SET);
  put_u64(impl_->file, impl_->count);
  std::fclose(impl_->file);
  impl_->file = nullptr;
}

std::vector<ScanRecord> read_shard(const std::string& path, int* k_out) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw ValidationError("cannot open shard file: " + path);
  char magic[4];
  if (std::fread(magic, 1, 4, f) != 4 || std::memcmp(magic, kMagic, 4) != 0) {
    std::fclose(f);
    throw ValidationError("not a zoo shard file: " + path);
  }
  try {
    const std::uint32_t version = get_u32(f);
    if (version != kVersion) throw ValidationError("unsupported shard version");
    const int k = static_cast<int>(get_u32(f));
    const std::uint64_t count = get_u64(f);
    if (k_out) *k_out = k;
    std::vector<ScanRecord> records;
    records.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
      ScanRecord rec;
      rec.subset.resize(static_cast<std::size_t>(k));
      for (int a = 0; a < k; ++a) rec.subset[static_cast<std::size_t>(a)] = get_u32(f);
      rec.j = get_f64(f);
      rec.is = get_f64(f);
      rec.p_j = get_f64(f);
      rec.p_is = get_f64(f);
      const int c = std::fgetc(f);
      if (c == EOF) throw ValidationError("shard file truncated");
      rec.flags = static_cast<std::uint8_t>(c);
      records.push_back(std::move(rec));
    }
    std::fclose(f);
    return records;
  } catch (...) {
    std::fclose(f);
    throw;
  }
}

}  // namespace premia
