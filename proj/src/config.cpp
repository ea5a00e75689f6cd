#include "ssda/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ssda {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  if (out.size() == 1 && out[0].empty()) out.clear();
  return out;
}

long to_long(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    long x = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return x;
  } catch (...) {
    throw std::runtime_error("config: key '" + key + "': expected integer, got '" + v + "'");
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return x;
  } catch (...) {
    throw std::runtime_error("config: key '" + key + "': expected number, got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::runtime_error("config: key '" + key + "': expected boolean, got '" + v + "'");
}

std::vector<double> to_doubles(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& part : split(v, ',')) out.push_back(to_double(key, part));
  return out;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

SplitKind parse_split_kind(const std::string& s) {
  if (s == "kfold") return SplitKind::kfold_subjects;
  if (s == "loso") return SplitKind::loso;
  throw std::runtime_error("unknown split kind '" + s + "' (expected kfold or loso)");
}

std::string to_string(SplitKind k) {
  return k == SplitKind::kfold_subjects ? "kfold" : "loso";
}

ModelConfig ModelConfig::paper_physionet() {
  ModelConfig m;
  m.channels = 64;
  m.window_len = 400;
  m.step = 20;
  m.upsample_rows = 4;
  m.class_count = 2;
  m.fc_hidden = 128;
  m.l2_factor = 0.0005;
  m.columns = {
      {64, 50, 80, 0.5, 64, 0.4, 100, 0.2, 2, 50, 64},
      {40, 45, 75, 0.5, 40, 0.4, 40, 0.4, 2, 20, 40},
      {30, 15, 35, 0.5, 30, 0.2, 30, 0.2, 2, 15, 30},
  };
  return m;
}

ModelConfig ModelConfig::paper_bci2a() {
  ModelConfig m = paper_physionet();
  m.channels = 22;
  m.step = 50;
  m.upsample_rows = 2;
  m.class_count = 4;
  return m;
}

std::vector<std::string> validate_config(const ModelConfig& cfg) {
  std::vector<std::string> v;
  auto bad = [&](const std::string& field, const std::string& rule) {
    v.push_back(field + ": " + rule);
  };
  if (cfg.channels < 1) bad("channels", "must be >= 1");
  if (cfg.window_len < 1) bad("window_len", "must be >= 1");
  if (cfg.step < 1) bad("window_step", "must be >= 1");
  if (cfg.upsample_rows < 1) bad("upsample_rows", "must be >= 1");
  if (cfg.class_count < 2) bad("classes", "must be >= 2");
  if (cfg.fc_hidden <= 0) bad("fc_hidden", "must be > 0");
  if (cfg.l2_factor < 0) bad("l2_factor", "must be >= 0");
  if (cfg.columns.empty()) bad("columns", "must have at least one column");
  if (cfg.only_column < 0 || cfg.only_column > static_cast<int>(cfg.columns.size()))
    bad("only_column", "must be 0 (all) or a 1-based column index");
  for (size_t i = 0; i < cfg.columns.size(); ++i) {
    const ColumnSpec& c = cfg.columns[i];
    std::string p = "col" + std::to_string(i + 1) + ".";
    if (c.conv_filters < 1) bad(p + "conv_filters", "must be >= 1");
    if (c.conv_kernel < 1 || c.conv_kernel > cfg.window_len)
      bad(p + "conv_kernel", "must be in [1, window_len]");
    long conv_w = cfg.window_len - c.conv_kernel + 1;
    if (c.pool < 1) {
      bad(p + "pool", "must be >= 1");
    } else if (conv_w >= 1 && conv_w / c.pool < 1) {
      bad(p + "pool", "pooled width would be empty");
    }
    if (c.dropout < 0 || c.dropout >= 1) bad(p + "dropout", "must be in [0, 1)");
    if (c.enc_lstm_units < 1) bad(p + "enc_lstm_units", "must be >= 1");
    if (c.enc_lstm_dropout < 0 || c.enc_lstm_dropout >= 1)
      bad(p + "enc_lstm_dropout", "must be in [0, 1)");
    if (c.dec_lstm_units < 1) bad(p + "dec_lstm_units", "must be >= 1");
    if (c.dec_lstm_dropout < 0 || c.dec_lstm_dropout >= 1)
      bad(p + "dec_lstm_dropout", "must be in [0, 1)");
    if (c.dec_reshape_rows < 1 || c.dec_reshape_cols < 1) {
      bad(p + "dec_reshape", "rows and cols must be >= 1");
    } else if (c.dec_reshape_rows * c.dec_reshape_cols != c.dec_lstm_units) {
      bad(p + "dec_reshape", "reshape product (" +
                                 std::to_string(c.dec_reshape_rows * c.dec_reshape_cols) +
                                 ") != dec_lstm_units (" + std::to_string(c.dec_lstm_units) + ")");
    }
    if (c.dec_conv_filters < 1) bad(p + "dec_conv_filters", "must be >= 1");
  }
  return v;
}

RunConfig parse_config_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config: line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key.empty())
      throw std::runtime_error("config: line " + std::to_string(lineno) + ": empty key");
    if (kv.count(key))
      throw std::runtime_error("config: duplicate key '" + key + "'");
    kv[key] = val;
  }

  RunConfig cfg;
  std::map<std::string, bool> used;
  auto take = [&](const std::string& key) -> const std::string* {
    auto it = kv.find(key);
    if (it == kv.end()) return nullptr;
    used[key] = true;
    return &it->second;
  };
  auto geti = [&](const std::string& key, long& dst) {
    if (const auto* v = take(key)) dst = to_long(key, *v);
  };
  auto getd = [&](const std::string& key, double& dst) {
    if (const auto* v = take(key)) dst = to_double(key, *v);
  };
  auto getb = [&](const std::string& key, bool& dst) {
    if (const auto* v = take(key)) dst = to_bool(key, *v);
  };

  // model
  geti("channels", cfg.model.channels);
  geti("window_len", cfg.model.window_len);
  geti("window_step", cfg.model.step);
  geti("upsample_rows", cfg.model.upsample_rows);
  long classes = cfg.model.class_count;
  geti("classes", classes);
  cfg.model.class_count = static_cast<int>(classes);
  geti("fc_hidden", cfg.model.fc_hidden);
  getd("l2_factor", cfg.model.l2_factor);
  getb("use_cnn", cfg.model.use_cnn);
  getb("use_lstm", cfg.model.use_lstm);
  getb("use_attention", cfg.model.use_attention);
  long only_col = cfg.model.only_column;
  geti("only_column", only_col);
  cfg.model.only_column = static_cast<int>(only_col);

  long ncols = 0;
  geti("columns", ncols);
  cfg.model.columns.resize(static_cast<size_t>(std::max<long>(ncols, 0)));
  for (long i = 0; i < ncols; ++i) {
    std::string p = "col" + std::to_string(i + 1) + ".";
    ColumnSpec& c = cfg.model.columns[static_cast<size_t>(i)];
    geti(p + "conv_filters", c.conv_filters);
    geti(p + "conv_kernel", c.conv_kernel);
    geti(p + "pool", c.pool);
    getd(p + "dropout", c.dropout);
    geti(p + "enc_lstm_units", c.enc_lstm_units);
    getd(p + "enc_lstm_dropout", c.enc_lstm_dropout);
    geti(p + "dec_lstm_units", c.dec_lstm_units);
    getd(p + "dec_lstm_dropout", c.dec_lstm_dropout);
    geti(p + "dec_reshape_rows", c.dec_reshape_rows);
    geti(p + "dec_reshape_cols", c.dec_reshape_cols);
    geti(p + "dec_conv_filters", c.dec_conv_filters);
  }

  // loss
  if (const auto* v = take("beta")) cfg.weights.beta = to_doubles("beta", *v);
  if (const auto* v = take("eta")) cfg.weights.eta = to_doubles("eta", *v);
  getd("gamma", cfg.weights.gamma);
  getb("ds_normalize", cfg.train.ds_normalize);
  geti("ds_pair_budget", cfg.train.ds_pair_budget);

  // train
  geti("epochs", cfg.train.epochs);
  getd("learning_rate", cfg.train.learning_rate);
  geti("batch_size", cfg.train.batch_size);
  getd("val_fraction", cfg.train.val_fraction);
  if (const auto* v = take("seed")) cfg.train.seed = static_cast<uint64_t>(to_long("seed", *v));
  getd("center_alpha", cfg.train.center_alpha);
  geti("min_labeled_per_batch", cfg.train.min_labeled_per_batch);
  getd("grid_min", cfg.train.grid_min);
  getd("grid_max", cfg.train.grid_max);
  getd("grid_step", cfg.train.grid_step);
  geti("grid_cap", cfg.train.grid_cap);
  getb("grid_full_factorial", cfg.train.grid_full_factorial);

  // split
  if (const auto* v = take("split_kind")) cfg.split_kind = parse_split_kind(*v);
  geti("split_folds", cfg.split_folds);
  geti("split_test_size", cfg.split_test_size);
  getb("split_disjoint", cfg.split_disjoint);
  getd("label_fraction", cfg.label_fraction);
  if (const auto* v = take("subject_exclude")) cfg.subject_exclude = split(*v, ',');

  // ingest
  if (const auto* v = take("event_map")) {
    for (const auto& pair : split(*v, ',')) {
      size_t colon = pair.find(':');
      if (colon == std::string::npos)
        throw std::runtime_error("config: event_map entries must look like LABEL:CLASS");
      std::string label = trim(pair.substr(0, colon));
      cfg.event_map[label] = static_cast<int>(to_long("event_map", trim(pair.substr(colon + 1))));
    }
  }
  getd("duration_s", cfg.duration_s);
  getd("onset_offset_ms", cfg.onset_offset_ms);

  for (const auto& [key, val] : kv) {
    (void)val;
    if (!used.count(key)) throw std::runtime_error("config: unknown key '" + key + "'");
  }

  // Default loss weights to zero vectors of the right length.
  size_t m = cfg.model.columns.size();
  if (cfg.weights.beta.empty()) cfg.weights.beta.assign(m, 0.0);
  if (cfg.weights.eta.empty()) cfg.weights.eta.assign(m, 0.0);
  if (cfg.weights.beta.size() != m || cfg.weights.eta.size() != m)
    throw std::runtime_error("config: beta/eta must list one weight per column");
  for (double b : cfg.weights.beta)
    if (b < 0) throw std::runtime_error("config: beta weights must be >= 0");
  for (double e : cfg.weights.eta)
    if (e < 0) throw std::runtime_error("config: eta weights must be >= 0");
  if (cfg.weights.gamma < 0) throw std::runtime_error("config: gamma must be >= 0");
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("config: cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

std::string config_to_text(const RunConfig& cfg) {
  std::ostringstream os;
  os << "# model\n";
  os << "channels = " << cfg.model.channels << "\n";
  os << "window_len = " << cfg.model.window_len << "\n";
  os << "window_step = " << cfg.model.step << "\n";
  os << "upsample_rows = " << cfg.model.upsample_rows << "\n";
  os << "classes = " << cfg.model.class_count << "\n";
  os << "fc_hidden = " << cfg.model.fc_hidden << "\n";
  os << "l2_factor = " << fmt(cfg.model.l2_factor) << "\n";
  os << "use_cnn = " << (cfg.model.use_cnn ? "true" : "false") << "\n";
  os << "use_lstm = " << (cfg.model.use_lstm ? "true" : "false") << "\n";
  os << "use_attention = " << (cfg.model.use_attention ? "true" : "false") << "\n";
  os << "only_column = " << cfg.model.only_column << "\n";
  os << "columns = " << cfg.model.columns.size() << "\n";
  for (size_t i = 0; i < cfg.model.columns.size(); ++i) {
    const ColumnSpec& c = cfg.model.columns[i];
    std::string p = "col" + std::to_string(i + 1) + ".";
    os << p << "conv_filters = " << c.conv_filters << "\n";
    os << p << "conv_kernel = " << c.conv_kernel << "\n";
    os << p << "pool = " << c.pool << "\n";
    os << p << "dropout = " << fmt(c.dropout) << "\n";
    os << p << "enc_lstm_units = " << c.enc_lstm_units << "\n";
    os << p << "enc_lstm_dropout = " << fmt(c.enc_lstm_dropout) << "\n";
    os << p << "dec_lstm_units = " << c.dec_lstm_units << "\n";
    os << p << "dec_lstm_dropout = " << fmt(c.dec_lstm_dropout) << "\n";
    os << p << "dec_reshape_rows = " << c.dec_reshape_rows << "\n";
    os << p << "dec_reshape_cols = " << c.dec_reshape_cols << "\n";
    os << p << "dec_conv_filters = " << c.dec_conv_filters << "\n";
  }
  os << "# loss\n";
  os << "beta = ";
  for (size_t i = 0; i < cfg.weights.beta.size(); ++i)
    os << (i ? "," : "") << fmt(cfg.weights.beta[i]);
  os << "\n";
  os << "eta = ";
  for (size_t i = 0; i < cfg.weights.eta.size(); ++i)
    os << (i ? "," : "") << fmt(cfg.weights.eta[i]);
  os << "\n";
  os << "gamma = " << fmt(cfg.weights.gamma) << "\n";
  os << "ds_normalize = " << (cfg.train.ds_normalize ? "true" : "false") << "\n";
  os << "ds_pair_budget = " << cfg.train.ds_pair_budget << "\n";
  os << "# train\n";
  os << "epochs = " << cfg.train.epochs << "\n";
  os << "learning_rate = " << fmt(cfg.train.learning_rate) << "\n";
  os << "batch_size = " << cfg.train.batch_size << "\n";
  os << "val_fraction = " << fmt(cfg.train.val_fraction) << "\n";
  os << "seed = " << cfg.train.seed << "\n";
  os << "center_alpha = " << fmt(cfg.train.center_alpha) << "\n";
  os << "min_labeled_per_batch = " << cfg.train.min_labeled_per_batch << "\n";
  os << "grid_min = " << fmt(cfg.train.grid_min) << "\n";
  os << "grid_max = " << fmt(cfg.train.grid_max) << "\n";
  os << "grid_step = " << fmt(cfg.train.grid_step) << "\n";
  os << "grid_cap = " << cfg.train.grid_cap << "\n";
  os << "grid_full_factorial = " << (cfg.train.grid_full_factorial ? "true" : "false") << "\n";
  os << "# split\n";
  os << "split_kind = " << to_string(cfg.split_kind) << "\n";
  os << "split_folds = " << cfg.split_folds << "\n";
  os << "split_test_size = " << cfg.split_test_size << "\n";
  os << "split_disjoint = " << (cfg.split_disjoint ? "true" : "false") << "\n";
  os << "label_fraction = " << fmt(cfg.label_fraction) << "\n";
  if (!cfg.subject_exclude.empty()) {
    os << "subject_exclude = ";
    for (size_t i = 0; i < cfg.subject_exclude.size(); ++i)
      os << (i ? "," : "") << cfg.subject_exclude[i];
    os << "\n";
  }
  os << "# ingest\n";
  if (!cfg.event_map.empty()) {
    os << "event_map = ";
    bool first = true;
    for (const auto& [label, cls] : cfg.event_map) {
      os << (first ? "" : ",") << label << ":" << cls;
      first = false;
    }
    os << "\n";
  }
  os << "duration_s = " << fmt(cfg.duration_s) << "\n";
  os << "onset_offset_ms = " << fmt(cfg.onset_offset_ms) << "\n";
  return os.str();
}

}  // namespace ssda
