#include "poprl/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "poprl/error.hpp"

namespace poprl {

namespace {

constexpr char kNetMagic[4] = {'P', 'R', 'L', 'C'};
constexpr char kLearnerMagic[4] = {'P', 'R', 'L', 'L'};
constexpr std::uint32_t kVersion = 1;

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
  write_raw(out, static_cast<std::uint64_t>(v.size()));
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(sizeof(double)) * v.size());
}

Vec read_vec(std::ifstream& in) {
  const auto n = static_cast<Eigen::Index>(read_raw<std::uint64_t>(in));
  Vec v(n);
  in.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(sizeof(double)) * n);
  return v;
}

void write_spec(std::ofstream& out, const NetworkSpec& spec) {
  write_raw(out, static_cast<std::int32_t>(spec.input_dim));
  write_raw(out, static_cast<std::uint32_t>(spec.hidden_dims.size()));
  for (int h : spec.hidden_dims) write_raw(out, static_cast<std::int32_t>(h));
  write_raw(out, static_cast<std::int32_t>(spec.output_dim));
  write_raw(out, static_cast<std::uint8_t>(
                     spec.output_activation == OutputActivation::Tanh ? 1 : 0));
  write_raw(out, static_cast<std::uint8_t>(spec.layer_norm ? 1 : 0));
}

NetworkSpec read_spec(std::ifstream& in) {
  NetworkSpec spec;
  spec.input_dim = read_raw<std::int32_t>(in);
  const auto n_hidden = read_raw<std::uint32_t>(in);
  spec.hidden_dims.resize(n_hidden);
  for (auto& h : spec.hidden_dims) h = read_raw<std::int32_t>(in);
  spec.output_dim = read_raw<std::int32_t>(in);
  spec.output_activation = read_raw<std::uint8_t>(in) != 0
                               ? OutputActivation::Tanh
                               : OutputActivation::Identity;
  spec.layer_norm = read_raw<std::uint8_t>(in) != 0;
  return spec;
}

void write_moments(std::ofstream& out, const AdamState& s) {
  write_vec(out, s.m);
  write_vec(out, s.v);
  write_raw(out, static_cast<std::int64_t>(s.t));
}

AdamState read_moments(std::ifstream& in) {
  AdamState s;
  s.m = read_vec(in);
  s.v = read_vec(in);
  s.t = read_raw<std::int64_t>(in);
  return s;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCategory::Io, "cannot open " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path, const char* magic) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCategory::Io, "cannot open " + path.string());
  char got[4];
  in.read(got, 4);
  if (!in || std::memcmp(got, magic, 4) != 0)
    fail(ErrorCategory::Io, "wrong file type: " + path.string());
  const auto version = read_raw<std::uint32_t>(in);
  if (version != kVersion)
    fail(ErrorCategory::Io,
         "unsupported checkpoint version " + std::to_string(version));
  return in;
}

}  // namespace

void save_network(const std::filesystem::path& path, const NetworkSpec& spec,
                  const Vec& params, const AdamState* moments) {
  auto out = open_out(path);
  out.write(kNetMagic, 4);
  write_raw(out, kVersion);
  write_spec(out, spec);
  write_vec(out, params);
  write_raw(out, static_cast<std::uint8_t>(moments ? 1 : 0));
  if (moments) write_moments(out, *moments);
  if (!out) fail(ErrorCategory::Io, "failed writing " + path.string());
}

NetworkCheckpoint load_network(const std::filesystem::path& path) {
  auto in = open_in(path, kNetMagic);
  NetworkCheckpoint ckpt;
  ckpt.spec = read_spec(in);
  ckpt.params = read_vec(in);
  ckpt.has_moments = read_raw<std::uint8_t>(in) != 0;
  ckpt.moments = ckpt.has_moments ? read_moments(in)
                                  : AdamState::zeros(ckpt.params.size());
  if (!in) fail(ErrorCategory::Io, "truncated checkpoint: " + path.string());
  if (ckpt.params.size() != ckpt.spec.param_count())
    fail(ErrorCategory::Io, "checkpoint parameter count mismatch");
  return ckpt;
}

void save_learner(const std::filesystem::path& path, const Learner& l) {
  auto out = open_out(path);
  out.write(kLearnerMagic, 4);
  write_raw(out, kVersion);
  write_spec(out, l.actor_spec);
  write_spec(out, l.critic_spec);
  for (const Vec* v : {&l.actor, &l.actor_target, &l.critic1, &l.critic2,
                       &l.critic1_target, &l.critic2_target})
    write_vec(out, *v);
  write_moments(out, l.actor_opt);
  write_moments(out, l.critic1_opt);
  write_moments(out, l.critic2_opt);
  write_raw(out, static_cast<std::int64_t>(l.update_counter));
  write_raw(out, l.cfg.gamma);
  write_raw(out, l.cfg.tau);
  write_raw(out, static_cast<std::int32_t>(l.cfg.policy_delay));
  write_raw(out, l.cfg.smoothing_noise_std);
  write_raw(out, l.cfg.smoothing_clip);
  write_raw(out, l.cfg.actor_lr);
  write_raw(out, l.cfg.critic_lr);
  write_raw(out, static_cast<std::int32_t>(l.cfg.batch_size));
  write_vec(out, l.action_low);
  write_vec(out, l.action_high);
  if (!out) fail(ErrorCategory::Io, "failed writing " + path.string());
}

Learner load_learner(const std::filesystem::path& path) {
  auto in = open_in(path, kLearnerMagic);
  Learner l;
  l.actor_spec = read_spec(in);
  l.critic_spec = read_spec(in);
  for (Vec* v : {&l.actor, &l.actor_target, &l.critic1, &l.critic2,
                 &l.critic1_target, &l.critic2_target})
    *v = read_vec(in);
  l.actor_opt = read_moments(in);
  l.critic1_opt = read_moments(in);
  l.critic2_opt = read_moments(in);
  l.update_counter = read_raw<std::int64_t>(in);
  l.cfg.gamma = read_raw<double>(in);
  l.cfg.tau = read_raw<double>(in);
  l.cfg.policy_delay = read_raw<std::int32_t>(in);
  l.cfg.smoothing_noise_std = read_raw<double>(in);
  l.cfg.smoothing_clip = read_raw<double>(in);
  l.cfg.actor_lr = read_raw<double>(in);
  l.cfg.critic_lr = read_raw<double>(in);
  l.cfg.batch_size = read_raw<std::int32_t>(in);
  l.action_low = read_vec(in);
  l.action_high = read_vec(in);
  if (!in) fail(ErrorCategory::Io, "truncated checkpoint: " + path.string());
  return l;
}

}  // namespace poprl
