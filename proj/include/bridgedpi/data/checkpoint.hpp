#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bridgedpi/data/dataset.hpp"
#include "bridgedpi/model/bridgedpi.hpp"

namespace bridgedpi::data {

inline constexpr char kCheckpointMagic[4] = {'B', 'D', 'P', 'I'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  ad::Shape shape;
  std::vector<float> values;
};

/// Everything needed to rebuild a trained model: architecture, vocabularies,
/// training metadata and the parameter and buffer tensors.
struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  model::ModelConfig config;
  std::string protein_symbols;
  std::string smiles_symbols;
  std::uint64_t seed = 0;
  double best_val_auc = std::numeric_limits<double>::quiet_NaN();
  std::size_t best_epoch = 0;
  std::vector<NamedTensor> tensors;

  const NamedTensor *find(const std::string &name) const {
    for (const auto &t : tensors)
      if (t.name == name)
        return &t;
    return nullptr;
  }
};

// ---------------------------------------------------------------------------
// ModelConfig <-> JSON

inline nlohmann::json config_to_json(const model::ModelConfig &c) {
  return {{"embed_dim", c.embed_dim},
          {"protein_mlp_widths", c.protein_mlp_widths},
          {"drug_mlp_widths", c.drug_mlp_widths},
          {"gnn_layers", c.gnn_layers},
          {"head_layers", c.head_layers},
          {"head_hidden", c.head_hidden},
          {"hyper_nodes", c.hyper_nodes},
          {"dropout_rate", c.dropout_rate},
          {"use_protein_kmer", c.use_protein_kmer},
          {"use_protein_cnn", c.use_protein_cnn},
          {"use_drug_fp", c.use_drug_fp},
          {"use_drug_cnn", c.use_drug_cnn},
          {"token_dim", c.token_dim},
          {"protein_kernel", c.protein_kernel},
          {"drug_kernel", c.drug_kernel},
          {"protein_max_len", c.protein_max_len},
          {"smiles_max_len", c.smiles_max_len},
          {"protein_vocab", c.protein_vocab},
          {"smiles_vocab", c.smiles_vocab},
          {"fp_radius", c.fp_radius},
          {"fp_bits", c.fp_bits},
          {"init_seed", c.init_seed}};
}

/// Missing keys keep their defaults; unknown keys are reported through warn.
inline model::ModelConfig config_from_json(const nlohmann::json &j, const WarningSink &warn) {
  if (!j.is_object())
    throw CheckpointError("checkpoint metadata: 'config' is not an object");
  model::ModelConfig c;
  const auto known = config_to_json(c);
  for (const auto &[key, value] : j.items())
    if (!known.contains(key))
      warn("checkpoint: ignoring unknown config key '" + key + "'");
  try {
    c.embed_dim = j.value("embed_dim", c.embed_dim);
    c.protein_mlp_widths = j.value("protein_mlp_widths", c.protein_mlp_widths);
    c.drug_mlp_widths = j.value("drug_mlp_widths", c.drug_mlp_widths);
    c.gnn_layers = j.value("gnn_layers", c.gnn_layers);
    c.head_layers = j.value("head_layers", c.head_layers);
    c.head_hidden = j.value("head_hidden", c.head_hidden);
    c.hyper_nodes = j.value("hyper_nodes", c.hyper_nodes);
    c.dropout_rate = j.value("dropout_rate", c.dropout_rate);
    c.use_protein_kmer = j.value("use_protein_kmer", c.use_protein_kmer);
    c.use_protein_cnn = j.value("use_protein_cnn", c.use_protein_cnn);
    c.use_drug_fp = j.value("use_drug_fp", c.use_drug_fp);
    c.use_drug_cnn = j.value("use_drug_cnn", c.use_drug_cnn);
    c.token_dim = j.value("token_dim", c.token_dim);
    c.protein_kernel = j.value("protein_kernel", c.protein_kernel);
    c.drug_kernel = j.value("drug_kernel", c.drug_kernel);
    c.protein_max_len = j.value("protein_max_len", c.protein_max_len);
    c.smiles_max_len = j.value("smiles_max_len", c.smiles_max_len);
    c.protein_vocab = j.value("protein_vocab", c.protein_vocab);
    c.smiles_vocab = j.value("smiles_vocab", c.smiles_vocab);
    c.fp_radius = j.value("fp_radius", c.fp_radius);
    c.fp_bits = j.value("fp_bits", c.fp_bits);
    c.init_seed = j.value("init_seed", c.init_seed);
  } catch (const nlohmann::json::exception &e) {
    throw CheckpointError(std::string("checkpoint metadata: bad config value: ") + e.what());
  }
  return c;
}

// ---------------------------------------------------------------------------
// Binary container

namespace detail {

inline void put_u32(std::string &out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i)
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string &out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i)
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
public:
  Reader(const std::string &bytes, const std::string &source) : bytes_(bytes), source_(source) {}

  void need(std::size_t n, const char *what) const {
    if (bytes_.size() - pos_ < n)
      throw CheckpointError(source_ + ": truncated checkpoint while reading " + what);
  }
  std::uint32_t u32(const char *what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64(const char *what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::string bytes(std::uint64_t n, const char *what) {
    if (n > bytes_.size() - pos_)
      throw CheckpointError(source_ + ": truncated checkpoint while reading " + what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const noexcept { return pos_ == bytes_.size(); }

private:
  const std::string &bytes_;
  const std::string &source_;
  std::size_t pos_ = 0;
};

} // namespace detail

inline std::string encode_checkpoint(const Checkpoint &ckpt) {
  nlohmann::json meta = {
      {"config", config_to_json(ckpt.config)},
      {"vocabulary", {{"protein", ckpt.protein_symbols}, {"smiles", ckpt.smiles_symbols}}},
      {"training",
       {{"seed", ckpt.seed},
        {"best_val_auc",
         std::isnan(ckpt.best_val_auc) ? nlohmann::json(nullptr) : nlohmann::json(ckpt.best_val_auc)},
        {"best_epoch", ckpt.best_epoch}}}};
  const std::string doc = meta.dump();

  std::string out(kCheckpointMagic, 4);
  detail::put_u32(out, ckpt.version);
  detail::put_u64(out, doc.size());
  out += doc;
  detail::put_u32(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto &t : ckpt.tensors) {
    if (ad::numel(t.shape) != t.values.size())
      throw CheckpointError("tensor '" + t.name + "' has " + std::to_string(t.values.size()) +
                            " values for shape " + ad::to_string(t.shape));
    detail::put_u32(out, static_cast<std::uint32_t>(t.name.size()));
    out += t.name;
    detail::put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape)
      detail::put_u64(out, d);
    for (float v : t.values)
      detail::put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

inline Checkpoint decode_checkpoint(const std::string &bytes, const std::string &source,
                                    const WarningSink &warn = default_warning) {
  detail::Reader in(bytes, source);
  if (in.bytes(4, "magic") != std::string(kCheckpointMagic, 4))
    throw CheckpointError(source + ": bad magic, not a checkpoint");
  Checkpoint ckpt;
  ckpt.version = in.u32("version");
  if (ckpt.version != kCheckpointVersion)
    throw CheckpointError(source + ": unsupported checkpoint version " +
                          std::to_string(ckpt.version) + " (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  const auto doc_len = in.u64("metadata length");
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(in.bytes(doc_len, "metadata"));
  } catch (const nlohmann::json::parse_error &e) {
    throw CheckpointError(source + ": malformed metadata: " + e.what());
  }
  if (!meta.is_object() || !meta.contains("config"))
    throw CheckpointError(source + ": metadata lacks a config");
  for (const auto &[key, value] : meta.items())
    if (key != "config" && key != "vocabulary" && key != "training")
      warn(source + ": ignoring unknown metadata key '" + key + "'");
  ckpt.config = config_from_json(meta["config"], warn);
  try {
    const auto vocab = meta.value("vocabulary", nlohmann::json::object());
    ckpt.protein_symbols =
        vocab.value("protein", protein::Vocabulary::amino_acids().symbols());
    ckpt.smiles_symbols = vocab.value("smiles", protein::Vocabulary::smiles().symbols());
    const auto training = meta.value("training", nlohmann::json::object());
    ckpt.seed = training.value("seed", std::uint64_t{0});
    ckpt.best_epoch = training.value("best_epoch", std::size_t{0});
    if (training.contains("best_val_auc") && !training["best_val_auc"].is_null())
      ckpt.best_val_auc = training["best_val_auc"].get<double>();
  } catch (const nlohmann::json::exception &e) {
    throw CheckpointError(source + ": bad metadata value: " + e.what());
  }

  const auto count = in.u32("tensor count");
  std::set<std::string> names;
  for (std::uint32_t k = 0; k < count; ++k) {
    NamedTensor t;
    t.name = in.bytes(in.u32("tensor name length"), "tensor name");
    if (!names.insert(t.name).second)
      throw CheckpointError(source + ": duplicate tensor '" + t.name + "'");
    const auto ndim = in.u32("tensor rank");
    std::uint64_t n = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      const auto extent = in.u64("tensor shape");
      if (extent != 0 && n > std::numeric_limits<std::uint64_t>::max() / 4 / extent)
        throw CheckpointError(source + ": tensor '" + t.name + "' shape overflows");
      n *= extent;
      t.shape.push_back(static_cast<std::size_t>(extent));
    }
    in.need(n * 4, ("data of tensor '" + t.name + "'").c_str());
    t.values.resize(n);
    for (auto &v : t.values)
      v = std::bit_cast<float>(in.u32("tensor data"));
    ckpt.tensors.push_back(std::move(t));
  }
  if (!in.done())
    throw CheckpointError(source + ": trailing bytes after the last tensor");
  return ckpt;
}

/// Writes to a temporary file beside `path` and renames it into place.
inline void save_checkpoint(const std::string &path, const Checkpoint &ckpt) {
  const auto bytes = encode_checkpoint(ckpt);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw CheckpointError("cannot write checkpoint '" + tmp + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out)
      throw CheckpointError("failed writing checkpoint '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw CheckpointError("cannot move checkpoint into '" + path + "'");
  }
}

inline Checkpoint load_checkpoint(const std::string &path,
                                  const WarningSink &warn = default_warning) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw CheckpointError("cannot read checkpoint '" + path + "'");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes, path, warn);
}

// ---------------------------------------------------------------------------
// Model <-> checkpoint

/// Copies every parameter and buffer of `model` into a checkpoint, rounding
/// to 32-bit floats.
template <typename T>
Checkpoint capture(const model::BridgeDPI<T> &model, const model::Featurizer &featurizer) {
  Checkpoint ckpt;
  ckpt.config = model.config();
  ckpt.protein_symbols = featurizer.protein_vocabulary().symbols();
  ckpt.smiles_symbols = featurizer.smiles_vocabulary().symbols();
  auto add = [&](const std::string &name, const ad::Tensor<T> &t) {
    NamedTensor nt{name, t.shape(), {}};
    nt.values.reserve(t.size());
    for (T v : t.values())
      nt.values.push_back(static_cast<float>(v));
    ckpt.tensors.push_back(std::move(nt));
  };
  for (const auto &p : model.parameters().params())
    add(p.name, p.value);
  for (const auto &[name, buffer] : model.parameters().buffers())
    add(name, *buffer);
  return ckpt;
}

inline model::Featurizer make_featurizer(const Checkpoint &ckpt) {
  return model::Featurizer(ckpt.config, protein::Vocabulary(ckpt.protein_symbols),
                           protein::Vocabulary(ckpt.smiles_symbols));
}

/// Rebuilds the model described by `ckpt`. The tensor set must match the
/// architecture exactly in names and shapes.
template <typename T> model::BridgeDPI<T> restore(const Checkpoint &ckpt) {
  if (protein::Vocabulary(ckpt.protein_symbols).size() != ckpt.config.protein_vocab ||
      protein::Vocabulary(ckpt.smiles_symbols).size() != ckpt.config.smiles_vocab)
    throw CheckpointError("checkpoint vocabulary sizes disagree with the config");
  model::BridgeDPI<T> m(ckpt.config);
  auto &store = m.parameters();
  std::size_t expected = store.params().size() + store.buffers().size();
  if (ckpt.tensors.size() != expected)
    throw CheckpointError("checkpoint has " + std::to_string(ckpt.tensors.size()) +
                          " tensors, model expects " + std::to_string(expected));
  for (const auto &t : ckpt.tensors) {
    if (!store.contains(t.name))
      throw CheckpointError("checkpoint tensor '" + t.name + "' is not part of the model");
    auto &dst = store.get(t.name);
    if (dst.shape() != t.shape)
      throw CheckpointError("checkpoint tensor '" + t.name + "' has shape " +
                            ad::to_string(t.shape) + ", model expects " +
                            ad::to_string(dst.shape()));
    auto &values = dst.values();
    for (std::size_t i = 0; i < values.size(); ++i)
      values[i] = static_cast<T>(t.values[i]);
  }
  return m;
}

} // namespace bridgedpi::data
