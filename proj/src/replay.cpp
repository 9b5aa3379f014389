#include "poprl/replay.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "poprl/error.hpp"

namespace poprl {

int Batch::target_count() const {
  int n = 0;
  for (const Origin& o : origins) n += o.is_target() ? 1 : 0;
  return n;
}

ReplayStore::ReplayStore(std::size_t capacity, int state_dim, int action_dim)
    : capacity_(capacity), state_dim_(state_dim), action_dim_(action_dim) {
  if (capacity_ < 1) fail(ErrorCategory::Config, "capacity must be >= 1");
  if (state_dim_ < 1 || action_dim_ < 1)
    fail(ErrorCategory::Config, "store dimensions must be >= 1");
}

const Transition& ReplayStore::at(std::size_t i) const {
  if (i >= size()) fail(ErrorCategory::Domain, "replay index out of range");
  if (entries_.size() < capacity_) return entries_[i];
  return entries_[(head_ + i) % capacity_];
}

void ReplayStore::push(Transition t) {
  if (t.state.size() != state_dim_ || t.next_state.size() != state_dim_)
    fail(ErrorCategory::Config, "transition state dimension mismatch");
  if (t.action.size() != action_dim_)
    fail(ErrorCategory::Config, "transition action dimension mismatch");
  if (!std::isfinite(t.reward))
    fail(ErrorCategory::Numeric, "transition reward is not finite");

  if (entries_.size() < capacity_) {
    entries_.push_back(std::move(t));
  } else {
    entries_[head_] = std::move(t);
    head_ = (head_ + 1) % capacity_;
  }
}

namespace {

Batch gather(const ReplayStore& store, const std::vector<std::size_t>& idx,
             int state_dim, int action_dim) {
  const int b = static_cast<int>(idx.size());
  Batch batch;
  batch.states.resize(state_dim, b);
  batch.actions.resize(action_dim, b);
  batch.rewards.resize(b);
  batch.next_states.resize(state_dim, b);
  batch.done.resize(b);
  batch.origins.resize(static_cast<size_t>(b));
  for (int i = 0; i < b; ++i) {
    const Transition& t = store.at(idx[static_cast<size_t>(i)]);
    batch.states.col(i) = t.state;
    batch.actions.col(i) = t.action;
    batch.rewards[i] = t.reward;
    batch.next_states.col(i) = t.next_state;
    batch.done[i] = t.done ? 1.0 : 0.0;
    batch.origins[static_cast<size_t>(i)] = t.origin;
  }
  return batch;
}

}  // namespace

Batch sample(const ReplayStore& store, int batch_size, std::mt19937_64& rng) {
  if (store.empty())
    fail(ErrorCategory::NotReady, "cannot sample from an empty replay store");
  if (batch_size < 1) fail(ErrorCategory::Config, "batch_size must be >= 1");

  std::uniform_int_distribution<std::size_t> pick(0, store.size() - 1);
  std::vector<std::size_t> idx(static_cast<size_t>(batch_size));
  for (auto& i : idx) i = pick(rng);
  return gather(store, idx, store.state_dim_, store.action_dim_);
}

DualReplayStore::DualReplayStore(std::size_t capacity_each, int state_dim,
                                 int action_dim, double mix_ratio)
    : target_store_(capacity_each, state_dim, action_dim),
      pop_store_(capacity_each, state_dim, action_dim),
      mix_ratio_(mix_ratio) {
  if (!(mix_ratio > 0.0 && mix_ratio < 1.0))
    fail(ErrorCategory::Config, "mix_ratio must lie in (0,1)");
}

void DualReplayStore::push(Transition t) {
  if (t.origin.is_target())
    target_store_.push(std::move(t));
  else
    pop_store_.push(std::move(t));
}

int mixed_target_count(double mix_ratio, int batch_size) {
  return static_cast<int>(
      std::floor(mix_ratio * static_cast<double>(batch_size) + 0.5));
}

Batch sample_mixed(const DualReplayStore& dual, int batch_size,
                   std::mt19937_64& rng) {
  if (dual.target_store().empty() || dual.pop_store().empty())
    fail(ErrorCategory::NotReady, "both stores must be non-empty for mixing");
  if (batch_size < 1) fail(ErrorCategory::Config, "batch_size must be >= 1");

  const int n_target = mixed_target_count(dual.mix_ratio(), batch_size);
  const int n_pop = batch_size - n_target;
  if (n_target == 0) return sample(dual.pop_store(), batch_size, rng);
  if (n_pop == 0) return sample(dual.target_store(), batch_size, rng);

  Batch a = sample(dual.target_store(), n_target, rng);
  Batch b = sample(dual.pop_store(), n_pop, rng);

  // Concatenate and shuffle column order.
  std::vector<int> perm(static_cast<size_t>(batch_size));
  for (int i = 0; i < batch_size; ++i) perm[static_cast<size_t>(i)] = i;
  for (int i = batch_size - 1; i > 0; --i) {
    std::uniform_int_distribution<int> pick(0, i);
    std::swap(perm[static_cast<size_t>(i)],
              perm[static_cast<size_t>(pick(rng))]);
  }

  Batch out;
  out.states.resize(a.states.rows(), batch_size);
  out.actions.resize(a.actions.rows(), batch_size);
  out.rewards.resize(batch_size);
  out.next_states.resize(a.next_states.rows(), batch_size);
  out.done.resize(batch_size);
  out.origins.resize(static_cast<size_t>(batch_size));
  for (int i = 0; i < batch_size; ++i) {
    const int src = perm[static_cast<size_t>(i)];
    const Batch& from = src < n_target ? a : b;
    const int j = src < n_target ? src : src - n_target;
    out.states.col(i) = from.states.col(j);
    out.actions.col(i) = from.actions.col(j);
    out.rewards[i] = from.rewards[j];
    out.next_states.col(i) = from.next_states.col(j);
    out.done[i] = from.done[j];
    out.origins[static_cast<size_t>(i)] = from.origins[static_cast<size_t>(j)];
  }
  return out;
}

namespace {

constexpr char kSnapshotMagic[4] = {'P', 'R', 'L', 'B'};
constexpr std::uint32_t kSnapshotVersion = 1;

void require_little_endian() {
  if constexpr (std::endian::native != std::endian::little)
    fail(ErrorCategory::Io, "snapshots require a little-endian platform");
}

template <typename T>
void write_raw(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::ifstream& in) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

void write_vec(std::ofstream& out, const Vec& v) {
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(sizeof(double)) * v.size());
}

Vec read_vec(std::ifstream& in, int n) {
  Vec v(n);
  in.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(sizeof(double)) * n);
  return v;
}

}  // namespace

void save_snapshot(const ReplayStore& store,
                   const std::filesystem::path& path) {
  require_little_endian();
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCategory::Io, "cannot open " + path.string());

  out.write(kSnapshotMagic, 4);
  write_raw(out, kSnapshotVersion);
  write_raw(out, static_cast<std::uint64_t>(store.capacity()));
  write_raw(out, static_cast<std::uint64_t>(store.size()));
  write_raw(out, static_cast<std::uint32_t>(store.state_dim_));
  write_raw(out, static_cast<std::uint32_t>(store.action_dim_));
  for (std::size_t i = 0; i < store.size(); ++i) {
    const Transition& t = store.at(i);
    write_vec(out, t.state);
    write_vec(out, t.action);
    write_raw(out, t.reward);
    write_vec(out, t.next_state);
    write_raw(out, static_cast<std::uint8_t>(t.done ? 1 : 0));
    write_raw(out, static_cast<std::uint8_t>(t.origin.is_target() ? 0 : 1));
    write_raw(out, static_cast<std::int32_t>(t.origin.index));
  }
  if (!out) fail(ErrorCategory::Io, "failed writing " + path.string());
}

ReplayStore load_snapshot(const std::filesystem::path& path) {
  require_little_endian();
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCategory::Io, "cannot open " + path.string());

  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kSnapshotMagic, 4) != 0)
    fail(ErrorCategory::Io, "not a replay snapshot: " + path.string());
  const auto version = read_raw<std::uint32_t>(in);
  if (version != kSnapshotVersion)
    fail(ErrorCategory::Io,
         "unsupported snapshot version " + std::to_string(version));
  const auto capacity = read_raw<std::uint64_t>(in);
  const auto size = read_raw<std::uint64_t>(in);
  const auto state_dim = static_cast<int>(read_raw<std::uint32_t>(in));
  const auto action_dim = static_cast<int>(read_raw<std::uint32_t>(in));

  ReplayStore store(capacity, state_dim, action_dim);
  for (std::uint64_t i = 0; i < size; ++i) {
    Transition t;
    t.state = read_vec(in, state_dim);
    t.action = read_vec(in, action_dim);
    t.reward = read_raw<double>(in);
    t.next_state = read_vec(in, state_dim);
    t.done = read_raw<std::uint8_t>(in) != 0;
    const bool pop = read_raw<std::uint8_t>(in) != 0;
    const auto index = read_raw<std::int32_t>(in);
    t.origin = pop ? Origin::population(index) : Origin::target();
    store.push(std::move(t));
  }
  if (!in) fail(ErrorCategory::Io, "truncated snapshot: " + path.string());
  return store;
}

}  // namespace poprl
