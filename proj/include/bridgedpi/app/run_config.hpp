#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <type_traits>
#include <sstream>
#include <string>
#include <vector>

#include "bridgedpi/data/split.hpp"
#include "bridgedpi/data/synthetic.hpp"
#include "bridgedpi/model/config.hpp"
#include "bridgedpi/train/trainer.hpp"

namespace bridgedpi::app {

/// Bad command-line usage: unknown keys, missing paths, malformed values.
class UsageError : public Error {
public:
  using Error::Error;
};

/// Every tunable of a run. Keys of the flat config document are the field
/// names of the model, training, split and synthetic settings.
struct RunConfig {
  model::ModelConfig model;
  train::TrainConfig train;
  data::SplitFractions split;
  data::SyntheticSpec synthetic;
  std::uint64_t split_seed = 0;

  RunConfig() { set_seed(0); }

  /// One seed for initialisation, batching, splitting and generation.
  void set_seed(std::uint64_t seed) {
    model.init_seed = seed;
    train.seed = seed;
    split_seed = seed;
    synthetic.seed = seed;
  }
};

namespace detail {

inline std::string trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos)
    return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename N> N parse_number(const std::string &key, const std::string &text) {
  N value{};
  const auto *end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty())
    throw UsageError("config key '" + key + "': cannot parse '" + text + "'");
  return value;
}

inline bool parse_bool(const std::string &key, const std::string &text) {
  if (text == "true" || text == "1" || text == "on" || text == "yes")
    return true;
  if (text == "false" || text == "0" || text == "off" || text == "no")
    return false;
  throw UsageError("config key '" + key + "': expected a boolean, got '" + text + "'");
}

inline std::vector<std::size_t> parse_widths(const std::string &key, const std::string &text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    out.push_back(parse_number<std::size_t>(key, trim(item)));
  if (out.empty())
    throw UsageError("config key '" + key + "': empty list");
  return out;
}

inline std::string join(const std::vector<std::size_t> &v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i)
    s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

inline std::string fmt(double x) {
  std::ostringstream o;
  o.precision(17);
  o << x;
  return o.str();
}

struct Field {
  std::function<void(RunConfig &, const std::string &key, const std::string &value)> set;
  std::function<std::string(const RunConfig &)> get;
};

template <typename N, typename Ref> Field number(Ref ref) {
  return {[ref](RunConfig &c, const std::string &k, const std::string &v) {
            ref(c) = parse_number<N>(k, v);
          },
          [ref](const RunConfig &c) {
            if constexpr (std::is_floating_point_v<N>)
              return fmt(ref(c));
            else
              return std::to_string(ref(c));
          }};
}

template <typename Ref> Field boolean(Ref ref) {
  return {[ref](RunConfig &c, const std::string &k, const std::string &v) {
            ref(c) = parse_bool(k, v);
          },
          [ref](const RunConfig &c) {
            return std::string(ref(c) ? "true" : "false");
          }};
}

template <typename Ref> Field widths(Ref ref) {
  return {[ref](RunConfig &c, const std::string &k, const std::string &v) {
            ref(c) = parse_widths(k, v);
          },
          [ref](const RunConfig &c) { return join(ref(c)); }};
}

#define BRIDGEDPI_REF(path) [](auto &c) -> auto & { return c.path; }

inline const std::map<std::string, Field> &fields() {
  static const std::map<std::string, Field> table = {
      {"embed_dim", number<std::size_t>(BRIDGEDPI_REF(model.embed_dim))},
      {"protein_mlp_widths", widths(BRIDGEDPI_REF(model.protein_mlp_widths))},
      {"drug_mlp_widths", widths(BRIDGEDPI_REF(model.drug_mlp_widths))},
      {"gnn_layers", number<std::size_t>(BRIDGEDPI_REF(model.gnn_layers))},
      {"head_layers", number<std::size_t>(BRIDGEDPI_REF(model.head_layers))},
      {"head_hidden", number<std::size_t>(BRIDGEDPI_REF(model.head_hidden))},
      {"hyper_nodes", number<int>(BRIDGEDPI_REF(model.hyper_nodes))},
      {"dropout_rate", number<double>(BRIDGEDPI_REF(model.dropout_rate))},
      {"use_protein_kmer", boolean(BRIDGEDPI_REF(model.use_protein_kmer))},
      {"use_protein_cnn", boolean(BRIDGEDPI_REF(model.use_protein_cnn))},
      {"use_drug_fp", boolean(BRIDGEDPI_REF(model.use_drug_fp))},
      {"use_drug_cnn", boolean(BRIDGEDPI_REF(model.use_drug_cnn))},
      {"token_dim", number<std::size_t>(BRIDGEDPI_REF(model.token_dim))},
      {"protein_kernel", number<std::size_t>(BRIDGEDPI_REF(model.protein_kernel))},
      {"drug_kernel", number<std::size_t>(BRIDGEDPI_REF(model.drug_kernel))},
      {"protein_max_len", number<std::size_t>(BRIDGEDPI_REF(model.protein_max_len))},
      {"smiles_max_len", number<std::size_t>(BRIDGEDPI_REF(model.smiles_max_len))},
      {"fp_radius", number<int>(BRIDGEDPI_REF(model.fp_radius))},
      {"fp_bits", number<std::size_t>(BRIDGEDPI_REF(model.fp_bits))},
      {"init_seed", number<std::uint64_t>(BRIDGEDPI_REF(model.init_seed))},

      {"learning_rate", number<double>(BRIDGEDPI_REF(train.learning_rate))},
      {"batch_size", number<std::size_t>(BRIDGEDPI_REF(train.batch_size))},
      {"max_epochs", number<std::size_t>(BRIDGEDPI_REF(train.max_epochs))},
      {"l2_lambda", number<double>(BRIDGEDPI_REF(train.l2_lambda))},
      {"adam_beta1", number<double>(BRIDGEDPI_REF(train.beta1))},
      {"adam_beta2", number<double>(BRIDGEDPI_REF(train.beta2))},
      {"adam_epsilon", number<double>(BRIDGEDPI_REF(train.epsilon))},
      {"train_seed", number<std::uint64_t>(BRIDGEDPI_REF(train.seed))},
      {"patience", number<std::size_t>(BRIDGEDPI_REF(train.patience))},
      {"l2_all_params", boolean(BRIDGEDPI_REF(train.l2_all_params))},
      {"deterministic", boolean(BRIDGEDPI_REF(train.deterministic))},

      {"train_fraction", number<double>(BRIDGEDPI_REF(split.train))},
      {"valid_fraction", number<double>(BRIDGEDPI_REF(split.valid))},
      {"test_fraction", number<double>(BRIDGEDPI_REF(split.test))},
      {"unseen_fraction", number<double>(BRIDGEDPI_REF(split.unseen_proteins))},
      {"split_seed", number<std::uint64_t>(BRIDGEDPI_REF(split_seed))},

      {"synthetic_pairs", number<std::size_t>(BRIDGEDPI_REF(synthetic.pairs))},
      {"synthetic_proteins", number<std::size_t>(BRIDGEDPI_REF(synthetic.proteins))},
      {"synthetic_drugs", number<std::size_t>(BRIDGEDPI_REF(synthetic.drugs))},
      {"synthetic_min_length", number<std::size_t>(BRIDGEDPI_REF(synthetic.min_length))},
      {"synthetic_max_length", number<std::size_t>(BRIDGEDPI_REF(synthetic.max_length))},
      {"synthetic_seed", number<std::uint64_t>(BRIDGEDPI_REF(synthetic.seed))},
  };
  return table;
}

#undef BRIDGEDPI_REF

} // namespace detail

/// Applies one `key=value` setting. The key `seed` sets every seed at once.
inline void apply_setting(RunConfig &config, const std::string &key, const std::string &value) {
  const auto k = detail::trim(key), v = detail::trim(value);
  if (k == "seed") {
    config.set_seed(detail::parse_number<std::uint64_t>(k, v));
    return;
  }
  const auto &table = detail::fields();
  const auto it = table.find(k);
  if (it == table.end())
    throw UsageError("unknown config key '" + k + "'");
  it->second.set(config, k, v);
}

inline void apply_assignment(RunConfig &config, const std::string &assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw UsageError("expected key=value, got '" + assignment + "'");
  apply_setting(config, assignment.substr(0, eq), assignment.substr(eq + 1));
}

/// Reads a flat document of `key = value` lines; '#' starts a comment.
inline void apply_config_text(RunConfig &config, std::istream &in, const std::string &source) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos)
      line.erase(hash);
    line = detail::trim(line);
    if (line.empty())
      continue;
    try {
      apply_assignment(config, line);
    } catch (const UsageError &e) {
      throw UsageError(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

inline void apply_config_file(RunConfig &config, const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw UsageError("cannot read config '" + path + "'");
  apply_config_text(config, in, path);
}

/// The resolved configuration as a config document, keys sorted.
inline std::string dump_config(const RunConfig &config) {
  std::string out;
  for (const auto &[key, field] : detail::fields())
    out += key + " = " + field.get(config) + "\n";
  return out;
}

} // namespace bridgedpi::app
