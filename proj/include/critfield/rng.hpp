#pragma once
#include <algorithm>
#include <atomic>
#include <cstdint>
#include <random>
#include <thread>
#include <vector>

namespace critfield {

// splitmix64 finalizer applied to (master, stream id); gives well separated
// seeds for the per-batch engines.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}
  static Rng stream(std::uint64_t master, std::uint64_t id) { return Rng(derive_seed(master, id)); }

  double normal() { return normal_(eng_); }
  double uniform() { return uniform_(eng_); }  // [0, 1)
  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

struct McOptions {
  long n_samples = 1000000;
  std::uint64_t seed = 1;
  int threads = 0;  // 0: hardware concurrency
  int batches = 100;
};

struct McEstimate {
  double value = 0.0;
  double std_error = 0.0;
  long n_used = 0;
  long n_discarded = 0;
};

int resolve_threads(int requested);

// Runs f(i) for i in [0, n) on a small worker pool. Each index writes its own
// slot, so the result does not depend on scheduling.
template <class F>
void parallel_for(int n, int threads, F&& f) {
  threads = std::max(1, std::min(resolve_threads(threads), n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) f(i);
    });
  for (auto& th : pool) th.join();
}

// Mean and standard error from equally sized batch means.
McEstimate batch_means(const std::vector<double>& means);

}  // namespace critfield

namespace critfield {

// Splits opt.n_samples over opt.batches independent streams. f(rng, n, discarded)
// returns the sum of the per-draw contributions of one batch; draws it rejects
// are reported through `discarded` and excluded from that batch's mean.
template <class F>
McEstimate run_mc(const McOptions& opt, F&& f) {
  const long n = std::max<long>(1, opt.n_samples);
  const int B = static_cast<int>(std::max<long>(1, std::min<long>(opt.batches, n)));
  std::vector<double> means(B);
  std::vector<long> disc(B, 0), used(B, 0);
  parallel_for(B, opt.threads, [&](int b) {
    long nb = n / B + (b < n % B ? 1 : 0);
    Rng rng = Rng::stream(opt.seed, static_cast<std::uint64_t>(b));
    long discarded = 0;
    double s = f(rng, nb, discarded);
    used[b] = nb - discarded;
    disc[b] = discarded;
    means[b] = used[b] > 0 ? s / used[b] : 0.0;
  });
  McEstimate e = batch_means(means);
  for (int b = 0; b < B; ++b) {
    e.n_used += used[b];
    e.n_discarded += disc[b];
  }
  return e;
}

// Batch-means MC for K quantities sharing the same draws. f(rng, n, discarded, sums)
// adds per-draw contributions into sums[0..K).
template <class F>
std::vector<McEstimate> run_mc_vec(const McOptions& opt, int K, F&& f) {
  const long n = std::max<long>(1, opt.n_samples);
  const int B = static_cast<int>(std::max<long>(1, std::min<long>(opt.batches, n)));
  std::vector<std::vector<double>> means(B, std::vector<double>(K, 0.0));
  std::vector<long> used(B, 0), disc(B, 0);
  parallel_for(B, opt.threads, [&](int b) {
    long nb = n / B + (b < n % B ? 1 : 0);
    Rng rng = Rng::stream(opt.seed, static_cast<std::uint64_t>(b));
    long discarded = 0;
    std::vector<double> s(K, 0.0);
    f(rng, nb, discarded, s.data());
    used[b] = nb - discarded;
    disc[b] = discarded;
    for (int k = 0; k < K; ++k) means[b][k] = used[b] > 0 ? s[k] / used[b] : 0.0;
  });
  std::vector<McEstimate> out(K);
  std::vector<double> col(B);
  for (int k = 0; k < K; ++k) {
    for (int b = 0; b < B; ++b) col[b] = means[b][k];
    out[k] = batch_means(col);
    for (int b = 0; b < B; ++b) {
      out[k].n_used += used[b];
      out[k].n_discarded += disc[b];
    }
  }
  return out;
}

}  // namespace critfield
