#pragma once

#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cgre/model.hpp"

namespace cgre {

// One experiment: data paths, model dimensions, optimization settings and the
// variant under test. Loaded from flat key=value text.
struct RunConfig {
  std::string train_path, test_path;
  std::string relations_path, types_path, constraints_path;
  std::optional<std::string> pretrained_path;
  std::string output_dir;

  VariantMode variant = VariantMode::cgre;
  ModelDims dims;
  int batch_size = 160;
  double learning_rate = 0.5;
  int epochs = 30;
  std::uint64_t seed = 1;
  std::vector<std::string> metrics{"auc", "pn", "f1"};
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline long long parse_int(const std::string& v, const std::string& where) {
  std::size_t used = 0;
  long long out = 0;
  try {
    out = std::stoll(v, &used);
  } catch (const std::exception&) {
    throw ConfigError(where + ": '" + v + "' is not an integer");
  }
  if (used != v.size())
    throw ConfigError(where + ": '" + v + "' is not an integer");
  return out;
}

inline double parse_double(const std::string& v, const std::string& where) {
  std::size_t used = 0;
  double out = 0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    throw ConfigError(where + ": '" + v + "' is not a number");
  }
  if (used != v.size() || !std::isfinite(out))
    throw ConfigError(where + ": '" + v + "' is not a finite number");
  return out;
}

inline int parse_positive_int(const std::string& v, const std::string& where) {
  long long out = parse_int(v, where);
  if (out < 1 || out > 1000000000)
    throw ConfigError(where + ": value " + v + " out of range [1, 1e9]");
  return static_cast<int>(out);
}

// Widths the architecture derives rather than reads: the graph-encoder output
// and the classifier input. The table lists them, so the keys are accepted,
// but a value disagreeing with the derived width is a configuration mistake.
struct DeclaredWidths {
  std::optional<int> output_size, input_size;
  std::string output_where, input_where;
};

struct ConfigParser {
  RunConfig cfg;
  DeclaredWidths declared;
  std::set<std::string> visited;  // canonical include paths, cycle guard

  void parse_file(const std::filesystem::path& path) {
    std::error_code ec;
    auto canon = std::filesystem::weakly_canonical(path, ec);
    const std::string key = ec ? path.string() : canon.string();
    if (!visited.insert(key).second)
      throw ConfigError("config include cycle through " + path.string());
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const std::string text = trim(line);
      if (text.empty() || text[0] == '#') continue;
      const std::string where =
          path.string() + ":" + std::to_string(lineno);
      if (text.rfind("include ", 0) == 0) {
        std::filesystem::path inc = trim(text.substr(8));
        if (inc.is_relative()) inc = path.parent_path() / inc;
        parse_file(inc);
        continue;
      }
      auto eq = text.find('=');
      if (eq == std::string::npos)
        throw ConfigError(where + ": expected key = value");
      apply(trim(text.substr(0, eq)), trim(text.substr(eq + 1)), where);
    }
  }

  void apply(const std::string& key, const std::string& value,
             const std::string& where) {
    if (value.empty()) throw ConfigError(where + ": empty value for '" + key + "'");
    if (key == "train") cfg.train_path = value;
    else if (key == "test") cfg.test_path = value;
    else if (key == "relations") cfg.relations_path = value;
    else if (key == "types") cfg.types_path = value;
    else if (key == "constraints") cfg.constraints_path = value;
    else if (key == "pretrained") cfg.pretrained_path = value;
    else if (key == "output") cfg.output_dir = value;
    else if (key == "variant") {
      try {
        cfg.variant = parse_variant(value);
      } catch (const ConfigError& e) {
        throw ConfigError(where + ": " + e.what());
      }
    } else if (key == "word size") cfg.dims.d_w = parse_positive_int(value, where);
    else if (key == "position size") cfg.dims.d_p = parse_positive_int(value, where);
    else if (key == "filter num.") cfg.dims.kernels = parse_positive_int(value, where);
    else if (key == "window size") cfg.dims.window = parse_positive_int(value, where);
    else if (key == "coefficient lambda") {
      cfg.dims.lambda = parse_double(value, where);
      if (!(cfg.dims.lambda > 0.0))
        throw ConfigError(where + ": coefficient lambda must be positive");
    } else if (key == "emb. size") cfg.dims.d_v = parse_positive_int(value, where);
    else if (key == "hidden size") cfg.dims.gcn_hidden = parse_positive_int(value, where);
    else if (key == "output size") {
      declared.output_size = parse_positive_int(value, where);
      declared.output_where = where;
    } else if (key == "input size") {
      declared.input_size = parse_positive_int(value, where);
      declared.input_where = where;
    } else if (key == "gcn layers") cfg.dims.gcn_layers = parse_positive_int(value, where);
    else if (key == "output option") {
      if (value == "last") cfg.dims.gcn_output = GcnOutput::last;
      else if (value == "last_two") cfg.dims.gcn_output = GcnOutput::last_two;
      else if (value == "last_three") cfg.dims.gcn_output = GcnOutput::last_three;
      else throw ConfigError(where + ": output option must be last, last_two or last_three");
    } else if (key == "type size") cfg.dims.type_dim = parse_positive_int(value, where);
    else if (key == "max length") cfg.dims.max_len = parse_positive_int(value, where);
    else if (key == "batch size") cfg.batch_size = parse_positive_int(value, where);
    else if (key == "learning rate") {
      cfg.learning_rate = parse_double(value, where);
      if (!(cfg.learning_rate >= 0.0))
        throw ConfigError(where + ": learning rate must be non-negative");
    } else if (key == "dropout rate") {
      cfg.dims.dropout = parse_double(value, where);
      if (!(cfg.dims.dropout >= 0.0 && cfg.dims.dropout < 1.0))
        throw ConfigError(where + ": dropout rate must lie in [0, 1)");
    } else if (key == "epochs") cfg.epochs = parse_positive_int(value, where);
    else if (key == "seed") {
      long long s = parse_int(value, where);
      if (s < 0) throw ConfigError(where + ": seed must be non-negative");
      cfg.seed = static_cast<std::uint64_t>(s);
    } else if (key == "metrics") {
      cfg.metrics.clear();
      std::size_t start = 0;
      while (start <= value.size()) {
        auto comma = value.find(',', start);
        if (comma == std::string::npos) comma = value.size();
        std::string tok = trim(value.substr(start, comma - start));
        if (!tok.empty()) {
          if (tok != "auc" && tok != "pn" && tok != "f1" && tok != "hits" &&
              tok != "aacc")
            throw ConfigError(where + ": unknown metric '" + tok +
                              "' (expected auc, pn, f1, hits, aacc)");
          cfg.metrics.push_back(tok);
        }
        start = comma + 1;
      }
      if (cfg.metrics.empty())
        throw ConfigError(where + ": metric list is empty");
    } else {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
  }

  void finalize() {
    for (const auto* p :
         {&cfg.train_path, &cfg.test_path, &cfg.relations_path,
          &cfg.types_path, &cfg.constraints_path}) {
      if (!p->empty() && !std::filesystem::exists(*p))
        throw ConfigError("config path does not exist: " + *p);
    }
    if (cfg.pretrained_path && !std::filesystem::exists(*cfg.pretrained_path))
      throw ConfigError("config path does not exist: " + *cfg.pretrained_path);

    const int sentence_dim = 3 * cfg.dims.kernels;
    if (declared.output_size && *declared.output_size != sentence_dim)
      throw ConfigError(declared.output_where +
                        ": output size must equal 3 * filter num. = " +
                        std::to_string(sentence_dim) +
                        " (node vectors line up with sentence vectors)");
    const int input_dim = cfg.variant == VariantMode::cgre ? 3 * sentence_dim
                                                           : sentence_dim;
    if (declared.input_size && *declared.input_size != input_dim)
      throw ConfigError(declared.input_where +
                        ": input size must equal the derived classifier width " +
                        std::to_string(input_dim));

    const int need_layers = cfg.dims.gcn_output == GcnOutput::last_three  ? 3
                            : cfg.dims.gcn_output == GcnOutput::last_two ? 2
                                                                         : 1;
    if (cfg.dims.gcn_layers < need_layers)
      throw ConfigError("output option " + std::string(to_string(cfg.dims.gcn_output)) +
                        " needs at least " + std::to_string(need_layers) +
                        " gcn layers, got " + std::to_string(cfg.dims.gcn_layers));
  }
};

}  // namespace detail

inline RunConfig load_run_config(const std::string& path) {
  detail::ConfigParser p;
  p.parse_file(path);
  p.finalize();
  return p.cfg;
}

}  // namespace cgre
