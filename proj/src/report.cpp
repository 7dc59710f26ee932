#include "hhws/report.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>

namespace hhws {

std::string format_number(double v) {
  if (std::isnan(v)) return "NA";
  if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
  if (v == 0.0) return "0";  // folds -0
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return {buf.data(), res.ptr};
}

void write_csv_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    const auto& f = fields[i];
    if (f.find_first_of(",\"\n\r") == std::string::npos) {
      out << f;
      continue;
    }
    out << '"';
    for (char c : f) {
      if (c == '"') out << '"';
      out << c;
    }
    out << '"';
  }
  out << '\n';
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Json to_json(const ThresholdSet& t) {
  Json vars = Json::array();
  for (std::size_t j = 0; j < t.size(); ++j) {
    Json v{{"name", t.names[j]}, {"selected", t.bounds[j].has_value()}};
    v["threshold"] = t.bounds[j] ? Json(*t.bounds[j]) : Json(nullptr);
    vars.push_back(std::move(v));
  }
  return Json{{"method", t.method}, {"variables", vars}, {"flags", t.flags}};
}

Json to_json(const MobTree& tree) {
  Json nodes = Json::array();
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const auto& n = tree.nodes[i];
    Json j{{"id", i}, {"parent", n.parent}, {"depth", n.depth}, {"n", n.rows.size()},
           {"slope", n.slope}, {"terminal", n.terminal()}};
    if (n.split_var) {
      j["split_variable"] = tree.names[*n.split_var];
      j["split_value"] = n.split_value;
      j["left"] = n.left;
      j["right"] = n.right;
    }
    Json tests = Json::array();
    for (std::size_t k = 0; k < n.tests.size(); ++k) {
      tests.push_back({{"variable", tree.names[tree.split_vars[k]]},
                       {"statistic", n.tests[k].statistic},
                       {"p_value", n.tests[k].p_value}});
    }
    j["tests"] = tests;
    nodes.push_back(std::move(j));
  }
  return Json{{"nodes", nodes}};
}

Json mars_json(const MarsModel& model, const std::vector<std::string>& names) {
  Json terms = Json::array();
  Json knots = Json::array();
  for (std::size_t k = 0; k < model.terms.size(); ++k) {
    const auto& t = model.terms[k];
    Json j;
    if (t.is_intercept()) {
      j["type"] = "intercept";
    } else if (t.covariate) {
      j["type"] = "covariate";
      j["index"] = *t.covariate;
    } else {
      j["type"] = "hinge";
      Json f = Json::array();
      for (const auto& h : t.factors) {
        f.push_back({{"variable", names[h.var]}, {"knot", h.knot}, {"sign", h.sign}});
        knots.push_back({{"variable", names[h.var]}, {"knot", h.knot}, {"sign", h.sign}, {"term", k}});
      }
      j["factors"] = f;
    }
    if (static_cast<Eigen::Index>(k) < model.coefficients.size()) j["coefficient"] = model.coefficients(static_cast<Eigen::Index>(k));
    terms.push_back(std::move(j));
  }
  return Json{{"terms", terms}, {"knots", knots}, {"rss", model.rss}, {"gcv", model.gcv}};
}

Json aim_json(const AimModel& model, const std::vector<std::string>& names) {
  Json rules = Json::array();
  for (const auto& r : model.rules) rules.push_back({{"variable", names[r.var]}, {"cut", r.cut}});
  return Json{{"rules", rules}, {"beta0", model.beta0}, {"beta1", model.beta1},
              {"K", model.k()}, {"degenerate", model.degenerate}};
}

}  // namespace hhws
