#include "ensnet/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "ensnet/config.hpp"
#include "ensnet/errors.hpp"

namespace ensnet {
namespace {

constexpr std::array<char, 8> kMagic = {'E', 'N', 'S', 'N', 'E', 'T', 'C', 'K'};
constexpr std::uint32_t kMaxRank = 8;
constexpr std::uint32_t kMaxName = 4096;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw CheckpointError("cannot open " + path.string() + " for writing");
  }

  void bytes(const void* data, std::size_t n) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!out_) throw CheckpointError("write failed for " + path_.string());
  }
  template <typename U>
  void value(U v) {
    bytes(&v, sizeof(v));
  }
  void tensor(const std::string& name, const Tensor<float>& t) {
    value(static_cast<std::uint32_t>(name.size()));
    bytes(name.data(), name.size());
    value(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) value(static_cast<std::uint64_t>(d));
    bytes(t.ptr(), t.size() * sizeof(float));
  }
  void close() {
    out_.flush();
    out_.close();
    if (out_.fail()) throw CheckpointError("write failed for " + path_.string());
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : in_(path, std::ios::binary) {
    if (!in_) throw CheckpointError("cannot open checkpoint " + path.string());
    in_.seekg(0, std::ios::end);
    size_ = static_cast<std::uint64_t>(in_.tellg());
    in_.seekg(0);
  }

  std::uint64_t offset() const noexcept { return offset_; }
  std::uint64_t size() const noexcept { return size_; }
  std::uint64_t remaining() const noexcept { return size_ - offset_; }

  void bytes(void* data, std::uint64_t n, const char* what) {
    if (n > remaining()) throw CheckpointError(std::string("truncated checkpoint while reading ") + what, offset_);
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (!in_) throw CheckpointError(std::string("read failed for ") + what, offset_);
    offset_ += n;
  }
  void skip(std::uint64_t n, const char* what) {
    if (n > remaining()) throw CheckpointError(std::string("truncated checkpoint while reading ") + what, offset_);
    in_.seekg(static_cast<std::streamoff>(n), std::ios::cur);
    offset_ += n;
  }
  template <typename U>
  U value(const char* what) {
    U v{};
    bytes(&v, sizeof(v), what);
    return v;
  }

 private:
  std::ifstream in_;
  std::uint64_t size_ = 0;
  std::uint64_t offset_ = 0;
};

struct TensorHeader {
  std::string name;
  Shape shape;
  std::uint64_t offset = 0;  // of the record start
};

TensorHeader read_tensor_header(Reader& r) {
  TensorHeader h;
  h.offset = r.offset();
  const auto name_length = r.value<std::uint32_t>("tensor name length");
  if (name_length == 0 || name_length > kMaxName) {
    throw CheckpointError("invalid tensor name length " + std::to_string(name_length), h.offset);
  }
  h.name.resize(name_length);
  r.bytes(h.name.data(), name_length, "tensor name");
  const auto rank = r.value<std::uint32_t>("tensor rank");
  if (rank > kMaxRank) throw CheckpointError("invalid rank " + std::to_string(rank) + " for " + h.name, h.offset);
  for (std::uint32_t i = 0; i < rank; ++i) {
    const auto extent = r.value<std::uint64_t>("tensor extent");
    if (extent == 0 || extent > r.size()) throw CheckpointError("invalid extent for " + h.name, h.offset);
    h.shape.push_back(static_cast<std::size_t>(extent));
  }
  return h;
}

std::uint64_t data_bytes(const Shape& shape) { return static_cast<std::uint64_t>(numel(shape)) * sizeof(float); }

struct Preamble {
  std::uint32_t version = 0;
  nlohmann::json meta;
  std::uint32_t tensor_count = 0;
};

Preamble read_preamble(Reader& r) {
  std::array<char, 8> magic{};
  r.bytes(magic.data(), magic.size(), "magic");
  if (magic != kMagic) throw CheckpointError("not an EnsNet checkpoint (bad magic)", 0);
  Preamble p;
  p.version = r.value<std::uint32_t>("version");
  if (p.version != kCheckpointVersion) throw CheckpointVersionError(p.version, kCheckpointVersion);
  const std::uint64_t meta_offset = r.offset();
  const auto meta_length = r.value<std::uint64_t>("metadata length");
  if (meta_length > r.remaining()) throw CheckpointError("truncated checkpoint while reading metadata", meta_offset);
  std::string text(meta_length, '\0');
  r.bytes(text.data(), meta_length, "metadata");
  try {
    p.meta = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("corrupt checkpoint metadata: ") + e.what(), meta_offset + 8);
  }
  p.tensor_count = r.value<std::uint32_t>("tensor count");
  return p;
}

template <typename Fn>
void for_each_slot(TrainingState& state, Fn&& fn) {
  for (Parameter<float>* p : state.model.all_parameters()) fn(p->name, p->value);
  for (auto& [name, tensor] : state.model.buffers()) fn(name, *tensor);
  auto moments = [&](AdamState<float>& opt) {
    for (std::size_t i = 0; i < opt.names.size(); ++i) {
      fn("opt." + opt.group + ".m." + opt.names[i], opt.m[i]);
      fn("opt." + opt.group + ".v." + opt.names[i], opt.v[i]);
    }
  };
  moments(state.base_optimizer);
  for (AdamState<float>& opt : state.subnet_optimizers) moments(opt);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const TrainingState& state, const TrainPlan& plan,
                     const nlohmann::json& run) {
  // Parameter accessors hand out mutable pointers; nothing is modified here.
  auto& mutable_state = const_cast<TrainingState&>(state);

  nlohmann::json meta;
  meta["format"] = "ensnet-checkpoint";
  meta["model"] = to_json(state.model.config());
  meta["model"]["name"] = state.model.config().name;
  meta["plan"] = to_json(plan);
  meta["next_epoch"] = state.next_epoch;
  meta["rng"] = {{"seed", plan.seed}, {"next_epoch", state.next_epoch}};
  nlohmann::json optimizers = nlohmann::json::array();
  optimizers.push_back({{"group", state.base_optimizer.group}, {"t", state.base_optimizer.t}});
  for (const AdamState<float>& opt : state.subnet_optimizers) optimizers.push_back({{"group", opt.group}, {"t", opt.t}});
  meta["optimizers"] = optimizers;
  meta["metrics"] = to_json(state.log);
  meta["run"] = run;
  const std::string meta_text = meta.dump();

  std::vector<std::pair<std::string, const Tensor<float>*>> slots;
  for_each_slot(mutable_state, [&](const std::string& name, Tensor<float>& t) { slots.emplace_back(name, &t); });

  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    Writer w(tmp);
    w.bytes(kMagic.data(), kMagic.size());
    w.value(kCheckpointVersion);
    w.value(static_cast<std::uint64_t>(meta_text.size()));
    w.bytes(meta_text.data(), meta_text.size());
    w.value(static_cast<std::uint32_t>(slots.size()));
    for (const auto& [name, tensor] : slots) w.tensor(name, *tensor);
    w.close();
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw CheckpointError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  Reader r(path);
  const Preamble pre = read_preamble(r);

  ModelConfig model_config;
  TrainPlan plan;
  try {
    nlohmann::json model_json = pre.meta.at("model");
    model_config = model_config_from_json(model_json);
    model_config.validate();
    plan = train_plan_from_json(pre.meta.at("plan"));
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("checkpoint metadata is inconsistent: ") + e.what(), 20);
  }

  Checkpoint ck{TrainingState::fresh(EnsNetModel::build(model_config, plan.seed), plan.adam), plan, nullptr};
  TrainingState& state = ck.state;
  try {
    state.next_epoch = pre.meta.at("next_epoch").get<std::uint32_t>();
    state.log = metrics_from_json(pre.meta.at("metrics"));
    const auto& optimizers = pre.meta.at("optimizers");
    if (optimizers.size() != 1 + state.subnet_optimizers.size()) throw CheckpointError("optimizer count mismatch");
    auto restore = [](AdamState<float>& opt, const nlohmann::json& j) {
      if (j.at("group").get<std::string>() != opt.group) throw CheckpointError("optimizer group mismatch");
      opt.t = j.at("t").get<std::uint64_t>();
    };
    restore(state.base_optimizer, optimizers[0]);
    for (std::size_t i = 0; i < state.subnet_optimizers.size(); ++i) restore(state.subnet_optimizers[i], optimizers[i + 1]);
    if (pre.meta.contains("run")) ck.run = pre.meta.at("run");
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("checkpoint metadata is inconsistent: ") + e.what(), 20);
  }

  std::map<std::string, Tensor<float>*> slots;
  for_each_slot(state, [&](const std::string& name, Tensor<float>& t) { slots.emplace(name, &t); });
  if (pre.tensor_count != slots.size()) {
    throw CheckpointError("checkpoint holds " + std::to_string(pre.tensor_count) + " tensors, model expects " +
                              std::to_string(slots.size()),
                          r.offset() - 4);
  }
  for (std::uint32_t i = 0; i < pre.tensor_count; ++i) {
    const TensorHeader h = read_tensor_header(r);
    const auto it = slots.find(h.name);
    if (it == slots.end()) throw CheckpointError("unexpected tensor '" + h.name + "'", h.offset);
    if (it->second->shape() != h.shape) {
      throw CheckpointError("tensor '" + h.name + "' has shape " + to_string(h.shape) + ", expected " +
                                to_string(it->second->shape()),
                            h.offset);
    }
    r.bytes(it->second->ptr(), data_bytes(h.shape), "tensor data");
    slots.erase(it);
  }
  if (r.remaining() != 0) throw CheckpointError("trailing bytes after the last tensor", r.offset());
  return ck;
}

CheckpointSummary inspect_checkpoint(const std::filesystem::path& path) {
  Reader r(path);
  const Preamble pre = read_preamble(r);
  CheckpointSummary s;
  s.version = pre.version;
  s.meta = pre.meta;
  s.file_size = r.size();
  for (std::uint32_t i = 0; i < pre.tensor_count; ++i) {
    TensorHeader h = read_tensor_header(r);
    r.skip(data_bytes(h.shape), "tensor data");
    s.tensors.emplace_back(std::move(h.name), std::move(h.shape));
  }
  if (r.remaining() != 0) throw CheckpointError("trailing bytes after the last tensor", r.offset());
  return s;
}

}  // namespace ensnet
