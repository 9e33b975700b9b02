// Copyright 2026 The etsam Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include "etsam/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace etsam {

namespace {

constexpr char kMagic[8] = {'E', 'T', 'S', 'A', 'M', 'C', 'K', 'P'};

std::uint8_t dtype_code(torch::ScalarType t) {
  switch (t) {
    case torch::kFloat32: return 0;
    case torch::kFloat64: return 1;
    case torch::kInt64: return 2;
    case torch::kUInt8: return 3;
    case torch::kBool: return 4;
    default: throw CheckpointError("unsupported dtype in checkpoint");
  }
}

torch::ScalarType dtype_from_code(std::uint8_t c) {
  switch (c) {
    case 0: return torch::kFloat32;
    case 1: return torch::kFloat64;
    case 2: return torch::kInt64;
    case 3: return torch::kUInt8;
    case 4: return torch::kBool;
    default: throw CheckpointError("unknown dtype code " + std::to_string(c));
  }
}

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_string(std::ostream& os, const std::string& s, bool wide) {
  if (wide) {
    put<std::uint64_t>(os, s.size());
  } else {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  }
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

class Reader {
 public:
  Reader(std::istream& is, std::string path) : is_(is), path_(std::move(path)) {}

  template <typename T>
  T get() {
    T v;
    bytes(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
  }

  std::string string(bool wide) {
    const std::uint64_t n = wide ? get<std::uint64_t>() : get<std::uint32_t>();
    if (n > (1ull << 32)) fail("implausible string length");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }

  void bytes(char* dst, std::uint64_t n) {
    is_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::uint64_t>(is_.gcount()) != n) fail("truncated file");
  }

  [[noreturn]] void fail(const std::string& msg) {
    throw CheckpointError("checkpoint " + path_ + ": " + msg);
  }

 private:
  std::istream& is_;
  std::string path_;
};

std::string shape_of(const torch::Tensor& t) {
  std::ostringstream os;
  os << t.sizes();
  return os.str();
}

}  // namespace

const torch::Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : arrays) {
    if (n == name) return &t;
  }
  return nullptr;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw CheckpointError("cannot write " + tmp);
    os.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(os, ckpt.version);
    put_string(os, ckpt.config_json, true);
    put_string(os, ckpt.meta_json, true);
    put<std::int64_t>(os, ckpt.step);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(ckpt.arrays.size()));
    for (const auto& [name, tensor] : ckpt.arrays) {
      const auto t = tensor.detach().cpu().contiguous();
      put_string(os, name, false);
      put<std::uint8_t>(os, dtype_code(t.scalar_type()));
      put<std::uint32_t>(os, static_cast<std::uint32_t>(t.dim()));
      for (auto d : t.sizes()) put<std::int64_t>(os, d);
      os.write(static_cast<const char*>(t.data_ptr()), static_cast<std::streamsize>(t.nbytes()));
    }
    if (!os) throw CheckpointError("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open checkpoint " + path.string());
  Reader r(is, path.string());
  char magic[8];
  r.bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(magic)) != 0) r.fail("bad magic");
  Checkpoint c;
  c.version = r.get<std::uint32_t>();
  if (c.version != kCheckpointVersion) {
    r.fail("unsupported version " + std::to_string(c.version));
  }
  c.config_json = r.string(true);
  c.meta_json = r.string(true);
  c.step = r.get<std::int64_t>();
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.string(false);
    const auto dtype = dtype_from_code(r.get<std::uint8_t>());
    const auto ndim = r.get<std::uint32_t>();
    if (ndim > 8) r.fail("array '" + name + "' has implausible rank");
    std::vector<std::int64_t> dims(ndim);
    for (auto& d : dims) {
      d = r.get<std::int64_t>();
      if (d < 0) r.fail("array '" + name + "' has a negative dimension");
    }
    auto t = torch::empty(dims, torch::TensorOptions().dtype(dtype));
    r.bytes(static_cast<char*>(t.data_ptr()), t.nbytes());
    c.arrays.emplace_back(std::move(name), std::move(t));
  }
  return c;
}

Checkpoint make_checkpoint(EtSam& model, std::int64_t step, torch::optim::AdamW* optimizer,
                           const std::string& meta_json) {
  Checkpoint c;
  c.config_json = model->config().to_json();
  c.meta_json = meta_json;
  c.step = step;
  for (const auto& item : model->named_parameters(true)) {
    c.arrays.emplace_back(item.key(), item.value().detach().clone());
  }
  for (const auto& item : model->named_buffers(true)) {
    c.arrays.emplace_back(item.key(), item.value().detach().clone());
  }
  if (optimizer) {
    const auto& params = optimizer->param_groups().at(0).params();
    auto& state = optimizer->state();
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto key = params[i].unsafeGetTensorImpl();
      auto it = state.find(key);
      if (it == state.end()) continue;
      const auto& s = static_cast<const torch::optim::AdamWParamState&>(*it->second);
      const std::string prefix = "optim." + std::to_string(i) + ".";
      c.arrays.emplace_back(prefix + "step", torch::full({1}, s.step(), torch::kInt64));
      c.arrays.emplace_back(prefix + "exp_avg", s.exp_avg().detach().clone());
      c.arrays.emplace_back(prefix + "exp_avg_sq", s.exp_avg_sq().detach().clone());
    }
  }
  return c;
}

void load_weights(EtSam& model, const Checkpoint& ckpt) {
  torch::NoGradGuard guard;
  auto copy = [&ckpt](const std::string& name, torch::Tensor& dst) {
    const torch::Tensor* src = ckpt.find(name);
    if (!src) throw CheckpointError("checkpoint is missing array '" + name + "'");
    if (!src->sizes().equals(dst.sizes())) {
      throw CheckpointError("shape mismatch for '" + name + "': checkpoint " + shape_of(*src) +
                            " vs model " + shape_of(dst));
    }
    dst.copy_(*src);
  };
  for (auto& item : model->named_parameters(true)) copy(item.key(), item.value());
  for (auto& item : model->named_buffers(true)) copy(item.key(), item.value());
}

void load_optimizer_state(torch::optim::AdamW& optimizer, const Checkpoint& ckpt) {
  const auto& params = optimizer.param_groups().at(0).params();
  auto& state = optimizer.state();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string prefix = "optim." + std::to_string(i) + ".";
    const auto* step = ckpt.find(prefix + "step");
    if (!step) continue;
    const auto* m = ckpt.find(prefix + "exp_avg");
    const auto* v = ckpt.find(prefix + "exp_avg_sq");
    if (!m || !v || !m->sizes().equals(params[i].sizes()) ||
        !v->sizes().equals(params[i].sizes())) {
      throw CheckpointError("optimizer state for parameter " + std::to_string(i) +
                            " does not match the model");
    }
    auto s = std::make_unique<torch::optim::AdamWParamState>();
    s->step(step->item<std::int64_t>());
    s->exp_avg(m->to(params[i].scalar_type()).clone());
    s->exp_avg_sq(v->to(params[i].scalar_type()).clone());
    state[params[i].unsafeGetTensorImpl()] = std::move(s);
  }
}

EtSam load_model(const std::filesystem::path& path) {
  const Checkpoint c = read_checkpoint(path);
  EtSam model(ModelConfig::from_json(c.config_json));
  const torch::Tensor* probe = c.find("point_decoder.output_token");
  if (probe) model->to(probe->scalar_type());
  load_weights(model, c);
  return model;
}

}  // namespace etsam
