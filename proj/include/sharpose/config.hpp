#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sharpose {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Architecture and runtime hyperparameters for one model instantiation.
struct ModelConfig {
  int input_h = 256;
  int input_w = 192;
  int channels = 3;
  int patch_h = 16;
  int patch_w = 16;
  double scale_coarse = 0.5;
  double scale_fine = 1.0;
  int embed_dim = 768;
  int depth = 12;
  int n_heads = 12;
  int keypoints = 17;
  double alpha = 0.4;
  double beta_ema = 0.99;
  double q_thres = 0.95;
  // Heatmaps are fixed at 1/4 of the input resolution.
  static constexpr int heatmap_down = 4;
  double norm_mean = 0.5;
  double norm_std = 0.5;

  int coarse_h() const { return static_cast<int>(std::lround(input_h * scale_coarse)); }
  int coarse_w() const { return static_cast<int>(std::lround(input_w * scale_coarse)); }
  int fine_h() const { return static_cast<int>(std::lround(input_h * scale_fine)); }
  int fine_w() const { return static_cast<int>(std::lround(input_w * scale_fine)); }

  int coarse_grid_rows() const { return coarse_h() / patch_h; }
  int coarse_grid_cols() const { return coarse_w() / patch_w; }
  int fine_grid_rows() const { return fine_h() / patch_h; }
  int fine_grid_cols() const { return fine_w() / patch_w; }

  int n_coarse() const { return coarse_grid_rows() * coarse_grid_cols(); }
  int n_fine() const { return fine_grid_rows() * fine_grid_cols(); }

  // Children per promoted coarse patch: (s_f / s_c)^2.
  int children_per_coarse() const {
    const double r = scale_fine / scale_coarse;
    return static_cast<int>(std::lround(r * r));
  }

  int n_high() const { return static_cast<int>(std::floor(alpha * n_coarse())); }

  // Complement rule: every unselected patch is carried over, so the image
  // stays fully covered even when alpha * N_c is not integral.
  int n_fine_tokens() const { return children_per_coarse() * n_high() + (n_coarse() - n_high()); }

  int heatmap_h() const { return input_h / heatmap_down; }
  int heatmap_w() const { return input_w / heatmap_down; }

  void validate() const {
    auto integral = [](double v) { return std::abs(v - std::lround(v)) < 1e-9; };
    if (input_h <= 0 || input_w <= 0 || channels <= 0) throw ConfigError("config: non-positive image dims");
    if (!integral(input_h * scale_coarse) || !integral(input_w * scale_coarse) || !integral(input_h * scale_fine) ||
        !integral(input_w * scale_fine)) {
      throw ConfigError("config: scaled image dims must be integral");
    }
    if (coarse_h() % patch_h != 0 || coarse_w() % patch_w != 0) throw ConfigError("config: coarse dims not divisible by patch size");
    if (fine_h() % patch_h != 0 || fine_w() % patch_w != 0) throw ConfigError("config: fine dims not divisible by patch size");
    if (alpha <= 0.0 || alpha > 1.0) throw ConfigError("config: alpha must be in (0, 1]");
    if (q_thres < 0.0 || q_thres > 1.0) throw ConfigError("config: q_thres must be in [0, 1]");
    const double ratio = scale_fine / scale_coarse;
    if (ratio <= 0.0 || !integral(ratio)) throw ConfigError("config: s_f/s_c must be a positive integer");
    if (input_h % heatmap_down != 0 || input_w % heatmap_down != 0) throw ConfigError("config: input dims not divisible by 4");
    if (embed_dim <= 0 || depth <= 0 || n_heads <= 0 || keypoints <= 0) throw ConfigError("config: non-positive model dims");
    if (embed_dim % n_heads != 0) throw ConfigError("config: embed_dim not divisible by n_heads");
    if (beta_ema < 0.0 || beta_ema >= 1.0) throw ConfigError("config: beta_ema must be in [0, 1)");
  }
};

// Full run configuration: the model plus everything a command needs.
struct RunConfig {
  ModelConfig model;
  std::string profile = "toy";
  std::string dataset = "synth";  // "synth" or "coco:<annotations.json>:<image_dir>"
  std::uint64_t seed = 7;
  int epochs = 12;
  int batch_size = 32;
  int train_samples = 2000;
  int heldout_samples = 200;
  double lr = 1e-3;
  double lambda_late = 0.03;
  double gt_sigma = 2.0;  // gaussian ground-truth stddev, heatmap cells
  double synth_kappa = 0.08;
  int threads = 2;
  std::string out_dir = "out";
};

inline ModelConfig profile_config(const std::string& name) {
  ModelConfig c;
  if (name == "base-256") {
    c.input_h = 256; c.input_w = 192; c.embed_dim = 768; c.depth = 12; c.n_heads = 12;
    c.patch_h = 16; c.patch_w = 16; c.alpha = 0.4;
  } else if (name == "base-384") {
    c.input_h = 384; c.input_w = 288; c.embed_dim = 768; c.depth = 12; c.n_heads = 12;
    c.patch_h = 16; c.patch_w = 16; c.alpha = 0.3;
  } else if (name == "small-256") {
    c.input_h = 256; c.input_w = 192; c.embed_dim = 384; c.depth = 12; c.n_heads = 6;
    c.patch_h = 16; c.patch_w = 16; c.alpha = 0.5;
  } else if (name == "small-384") {
    c.input_h = 384; c.input_w = 288; c.embed_dim = 384; c.depth = 12; c.n_heads = 6;
    c.patch_h = 16; c.patch_w = 16; c.alpha = 0.5;
  } else if (name == "toy") {
    c.input_h = 64; c.input_w = 48; c.embed_dim = 64; c.depth = 4; c.n_heads = 4;
    c.patch_h = 8; c.patch_w = 8; c.alpha = 0.5;
  } else {
    throw ConfigError("unknown profile: " + name);
  }
  c.validate();
  return c;
}

inline const std::vector<std::string>& known_profiles() {
  static const std::vector<std::string> names = {"base-256", "base-384", "small-256", "small-384", "toy"};
  return names;
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config: bad numeric value for key '" + key + "': " + v);
  }
}

inline int parse_int(const std::string& key, const std::string& v) {
  const double d = parse_double(key, v);
  if (std::abs(d - std::lround(d)) > 1e-9) throw ConfigError("config: key '" + key + "' expects an integer");
  return static_cast<int>(std::lround(d));
}

}  // namespace detail

// Flat key=value parser. '#' starts a comment; blank lines ignored; unknown
// keys are hard errors so typos cannot silently change a run.
inline RunConfig parse_run_config(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::vector<std::string> order;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config: expected key=value, got: " + line);
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string val = detail::trim(line.substr(eq + 1));
    kv[key] = val;
    order.push_back(key);
  }

  RunConfig rc;
  // Profile applies first so explicit keys can override it.
  if (auto it = kv.find("profile"); it != kv.end()) {
    rc.model = profile_config(it->second);
    rc.profile = it->second;
  }
  for (const std::string& key : order) {
    const std::string& v = kv[key];
    if (key == "profile") continue;
    else if (key == "input_h") rc.model.input_h = detail::parse_int(key, v);
    else if (key == "input_w") rc.model.input_w = detail::parse_int(key, v);
    else if (key == "channels") rc.model.channels = detail::parse_int(key, v);
    else if (key == "patch_h") rc.model.patch_h = detail::parse_int(key, v);
    else if (key == "patch_w") rc.model.patch_w = detail::parse_int(key, v);
    else if (key == "scale_coarse") rc.model.scale_coarse = detail::parse_double(key, v);
    else if (key == "scale_fine") rc.model.scale_fine = detail::parse_double(key, v);
    else if (key == "embed_dim") rc.model.embed_dim = detail::parse_int(key, v);
    else if (key == "depth") rc.model.depth = detail::parse_int(key, v);
    else if (key == "n_heads") rc.model.n_heads = detail::parse_int(key, v);
    else if (key == "keypoints") rc.model.keypoints = detail::parse_int(key, v);
    else if (key == "alpha") rc.model.alpha = detail::parse_double(key, v);
    else if (key == "beta_ema") rc.model.beta_ema = detail::parse_double(key, v);
    else if (key == "q_thres") rc.model.q_thres = detail::parse_double(key, v);
    else if (key == "norm_mean") rc.model.norm_mean = detail::parse_double(key, v);
    else if (key == "norm_std") rc.model.norm_std = detail::parse_double(key, v);
    else if (key == "dataset") rc.dataset = v;
    else if (key == "seed") rc.seed = static_cast<std::uint64_t>(std::stoull(v));
    else if (key == "epochs") rc.epochs = detail::parse_int(key, v);
    else if (key == "batch_size") rc.batch_size = detail::parse_int(key, v);
    else if (key == "train_samples") rc.train_samples = detail::parse_int(key, v);
    else if (key == "heldout_samples") rc.heldout_samples = detail::parse_int(key, v);
    else if (key == "lr") rc.lr = detail::parse_double(key, v);
    else if (key == "lambda_late") rc.lambda_late = detail::parse_double(key, v);
    else if (key == "gt_sigma") rc.gt_sigma = detail::parse_double(key, v);
    else if (key == "synth_kappa") rc.synth_kappa = detail::parse_double(key, v);
    else if (key == "threads") rc.threads = detail::parse_int(key, v);
    else if (key == "out_dir") rc.out_dir = v;
    else throw ConfigError("config: unknown key '" + key + "'");
  }
  rc.model.validate();
  if (rc.epochs <= 0 || rc.batch_size <= 0 || rc.train_samples <= 0) throw ConfigError("config: non-positive run sizes");
  if (rc.threads <= 0) throw ConfigError("config: threads must be positive");
  return rc;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  return parse_run_config(in);
}

// Serialized snapshot embedded in checkpoints; parseable by parse_run_config.
inline std::string run_config_text(const RunConfig& rc) {
  std::ostringstream os;
  os.precision(17);
  os << "input_h=" << rc.model.input_h << "\n";
  os << "input_w=" << rc.model.input_w << "\n";
  os << "channels=" << rc.model.channels << "\n";
  os << "patch_h=" << rc.model.patch_h << "\n";
  os << "patch_w=" << rc.model.patch_w << "\n";
  os << "scale_coarse=" << rc.model.scale_coarse << "\n";
  os << "scale_fine=" << rc.model.scale_fine << "\n";
  os << "embed_dim=" << rc.model.embed_dim << "\n";
  os << "depth=" << rc.model.depth << "\n";
  os << "n_heads=" << rc.model.n_heads << "\n";
  os << "keypoints=" << rc.model.keypoints << "\n";
  os << "alpha=" << rc.model.alpha << "\n";
  os << "beta_ema=" << rc.model.beta_ema << "\n";
  os << "q_thres=" << rc.model.q_thres << "\n";
  os << "norm_mean=" << rc.model.norm_mean << "\n";
  os << "norm_std=" << rc.model.norm_std << "\n";
  os << "dataset=" << rc.dataset << "\n";
  os << "seed=" << rc.seed << "\n";
  os << "epochs=" << rc.epochs << "\n";
  os << "batch_size=" << rc.batch_size << "\n";
  os << "train_samples=" << rc.train_samples << "\n";
  os << "heldout_samples=" << rc.heldout_samples << "\n";
  os << "lr=" << rc.lr << "\n";
  os << "lambda_late=" << rc.lambda_late << "\n";
  os << "gt_sigma=" << rc.gt_sigma << "\n";
  os << "synth_kappa=" << rc.synth_kappa << "\n";
  os << "threads=" << rc.threads << "\n";
  os << "out_dir=" << rc.out_dir << "\n";
  return os.str();
}

}  // namespace sharpose
