#include "hhws/methods.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

#include "hhws/aim.hpp"
#include "hhws/benchmarks.hpp"
#include "hhws/mars.hpp"
#include "hhws/mob.hpp"
#include "hhws/prim.hpp"

namespace hhws {

const std::vector<std::string>& method_keys() {
  static const std::vector<std::string> keys{"mob", "mars", "prim", "aim", "segmented", "gam"};
  return keys;
}

bool is_method(std::string_view key) {
  const auto& k = method_keys();
  return std::find(k.begin(), k.end(), key) != k.end();
}

std::string method_label(std::string_view key) {
  if (key == "segmented") return "Segmented";
  if (key == "gam") return "GAM";
  std::string out(key);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return out;
}

ThresholdMethod make_method(std::string_view key, const MethodSettings& s) {
  LocalModel model;
  model.family = s.family;
  model.slope.columns = s.slope_columns;

  if (key == "mob") {
    MobConfig cfg;
    cfg.min_node = s.min_node;
    cfg.model = model;
    cfg.model.slope.mean = s.slope_mean.value_or(false);
    return [cfg](const Dataset& d) { return extract_thresholds(grow(d, cfg)); };
  }
  if (key == "prim") {
    PrimConfig cfg;
    cfg.alpha = s.prim_alpha;
    cfg.paste = s.prim_paste;
    cfg.model = model;
    cfg.model.slope.mean = s.slope_mean.value_or(true);
    return [cfg](const Dataset& d) { return fit_prim(d, cfg).thresholds; };
  }
  if (key == "mars") {
    MarsConfig cfg;
    cfg.max_terms = s.mars_max_terms;
    cfg.degree = s.mars_degree;
    cfg.min_span = s.min_node;
    cfg.min_box = s.min_node;
    cfg.family = s.family;
    return [cfg](const Dataset& d) { return fit_mars(d, cfg).thresholds; };
  }
  if (key == "aim") {
    AimConfig cfg;
    cfg.max_splits_per_var = s.aim_max_splits;
    cfg.folds = s.aim_folds;
    return [cfg](const Dataset& d) { return extract_thresholds_aim(select_k_cv(d, cfg), d.names); };
  }
  if (key == "segmented") {
    SegmentedConfig cfg;
    cfg.init_count = s.segmented_init;
    cfg.min_obs = s.min_node;
    cfg.family = s.family;
    return [cfg](const Dataset& d) { return fit_segmented(d, cfg); };
  }
  if (key == "gam") {
    CurveConfig cfg;
    cfg.df = s.gam_df;
    cfg.family = s.family;
    return [cfg](const Dataset& d) { return curve_ci_threshold(d, cfg); };
  }
  throw std::invalid_argument("unknown method: " + std::string(key));
}

}  // namespace hhws
