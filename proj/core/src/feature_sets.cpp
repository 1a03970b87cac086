#include <algorithm>
#include <cctype>
#include <charconv>

#include "emowatch/errors.hpp"
#include "emowatch/features.hpp"

namespace emowatch {

namespace {

bool starts_with(std::string_view s, std::string_view p) { return s.substr(0, p.size()) == p; }
bool ends_with(std::string_view s, std::string_view p) {
  return s.size() >= p.size() && s.substr(s.size() - p.size()) == p;
}

bool is_hrv_column(std::string_view name) {
  return name == "sdnn" || name == "rmssd" || name == "nn50" || name == "pnn50" ||
         name == "hr_range";
}

std::string lower_trim(std::string_view s) {
  std::string out;
  for (char c : s) out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  auto b = out.find_first_not_of(" \t");
  auto e = out.find_last_not_of(" \t");
  if (b == std::string::npos) return {};
  return out.substr(b, e - b + 1);
}

}  // namespace

FeatureGroup column_group(std::string_view name) {
  if (is_hrv_column(name)) return FeatureGroup::hrv;
  if (name == "age") return FeatureGroup::age;
  if (starts_with(name, "gender_")) return FeatureGroup::gender;
  if (name == "hr" || starts_with(name, "hr_")) return FeatureGroup::hr;
  if (starts_with(name, "acc_")) return FeatureGroup::acc;
  if (starts_with(name, "gyro_")) return FeatureGroup::gyro;
  throw SpecError("column \"" + std::string(name) + "\" belongs to no feature group");
}

std::string FeatureSetSpec::name() const {
  std::vector<std::string> groups;
  if (hrv) groups.emplace_back("Hrv");
  if (hr) groups.emplace_back("Hr");
  if (acc) groups.emplace_back("Acc");
  if (gyro) groups.emplace_back("Gyro");
  std::string out;
  if (pca_components) {
    out = "PCA (" + std::to_string(*pca_components) + " components)";
    if (hrv && hr && acc && gyro && !without_age && !without_gender && !without_median_mode) {
      return out;
    }
    out += " of ";
  }
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (i) out += ", ";
    out += groups[i];
  }
  std::vector<std::string> dropped;
  if (without_age) dropped.emplace_back("age");
  if (without_gender) dropped.emplace_back("gender");
  if (without_median_mode) dropped.emplace_back("median & mode");
  if (!dropped.empty()) {
    out += " (without ";
    if (dropped.size() == 1) {
      out += dropped[0];
    } else if (dropped.size() == 2) {
      out += dropped[0] + " & " + dropped[1];
    } else {
      out += dropped[0] + ", " + dropped[1] + ", " + dropped[2];
    }
    out += ")";
  }
  return out;
}

FeatureSetSpec parse_feature_set(std::string_view text) {
  const std::string s = lower_trim(text);
  FeatureSetSpec spec;
  std::string_view body = s;
  std::string_view exclusions;

  if (starts_with(body, "pca")) {
    // "pca(3)", "pca (3 components)", optionally followed by " of <groups>".
    auto open = body.find('(');
    auto close = body.find(')');
    if (open == std::string_view::npos || close == std::string_view::npos || close < open) {
      throw SpecError("PCA feature set needs a component count, e.g. PCA(3)");
    }
    std::string_view inner = body.substr(open + 1, close - open - 1);
    std::size_t k = 0;
    auto [ptr, ec] = std::from_chars(inner.data(), inner.data() + inner.size(), k);
    if (ec != std::errc() || k == 0) throw SpecError("bad PCA component count in \"" + s + "\"");
    spec.pca_components = k;
    body = body.substr(close + 1);
    auto of = body.find("of ");
    body = of == std::string_view::npos ? std::string_view("all") : body.substr(of + 3);
  }

  if (auto paren = body.find('('); paren != std::string_view::npos) {
    exclusions = body.substr(paren + 1);
    body = body.substr(0, paren);
  }

  bool any = false;
  std::size_t start = 0;
  while (start <= body.size()) {
    std::size_t comma = body.find(',', start);
    if (comma == std::string_view::npos) comma = body.size();
    const std::string tok = lower_trim(body.substr(start, comma - start));
    start = comma + 1;
    if (tok.empty()) continue;
    any = true;
    if (tok == "hrv") {
      spec.hrv = true;
    } else if (tok == "hr") {
      spec.hr = true;
    } else if (tok == "acc") {
      spec.acc = true;
    } else if (tok == "gyro" || tok == "gryo") {
      spec.gyro = true;
    } else if (tok == "all") {
      spec.hrv = spec.hr = spec.acc = spec.gyro = true;
    } else {
      throw SpecError("unknown feature group \"" + tok + "\"");
    }
  }
  if (!any) throw SpecError("feature set \"" + std::string(text) + "\" names no feature group");

  if (!exclusions.empty()) {
    if (exclusions.find("without") == std::string_view::npos || exclusions.back() != ')') {
      throw SpecError("unrecognised exclusion clause in \"" + std::string(text) + "\"");
    }
    spec.without_age = exclusions.find("age") != std::string_view::npos;
    spec.without_gender = exclusions.find("gender") != std::string_view::npos;
    spec.without_median_mode = exclusions.find("median") != std::string_view::npos ||
                               exclusions.find("mode") != std::string_view::npos;
    if (!spec.without_age && !spec.without_gender && !spec.without_median_mode) {
      throw SpecError("exclusion clause drops nothing in \"" + std::string(text) + "\"");
    }
  }
  return spec;
}

std::vector<FeatureSetSpec> statistical_feature_sets() {
  auto make = [](bool hrv, bool hr, bool acc, bool gyro, bool no_age = false,
                 bool no_gender = false, bool no_mm = false) {
    FeatureSetSpec s;
    s.hrv = hrv;
    s.hr = hr;
    s.acc = acc;
    s.gyro = gyro;
    s.without_age = no_age;
    s.without_gender = no_gender;
    s.without_median_mode = no_mm;
    return s;
  };
  return {
      make(true, true, true, true),
      make(false, true, true, true),
      make(true, false, true, true),
      make(true, true, true, false),
      make(true, true, false, true),
      make(true, true, false, false),
      make(true, false, false, false),
      make(false, true, false, false),
      make(true, true, true, true, true),
      make(true, true, true, true, false, true),
      make(true, true, true, true, true, true),
      make(true, true, true, true, false, false, true),
      make(true, true, true, true, true, true, true),
      make(false, false, true, true),
      make(false, false, true, true, false, true),
      make(false, false, true, true, true),
      make(false, false, true, true, true, true),
  };
}

std::vector<FeatureSetSpec> nonstatistical_feature_sets() {
  auto make = [](bool hr, bool acc, bool gyro, bool no_age, bool no_gender) {
    FeatureSetSpec s;
    s.hr = hr;
    s.acc = acc;
    s.gyro = gyro;
    s.without_age = no_age;
    s.without_gender = no_gender;
    return s;
  };
  FeatureSetSpec pca = make(true, true, true, false, false);
  pca.hrv = true;
  pca.pca_components = 3;
  return {
      make(true, true, true, false, false), make(true, true, true, true, false),
      make(true, true, true, false, true),  make(true, true, true, true, true),
      make(false, true, true, true, true),  make(true, false, false, true, true),
      pca,
  };
}

std::vector<std::size_t> resolve_feature_set(const std::vector<std::string>& columns,
                                             const FeatureSetSpec& spec) {
  std::vector<std::size_t> out;
  bool has_sensor = false;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    const auto& name = columns[c];
    bool keep = false;
    switch (column_group(name)) {
      case FeatureGroup::hr: keep = spec.hr; break;
      case FeatureGroup::hrv: keep = spec.hrv; break;
      case FeatureGroup::acc: keep = spec.acc; break;
      case FeatureGroup::gyro: keep = spec.gyro; break;
      case FeatureGroup::age: keep = !spec.without_age; break;
      case FeatureGroup::gender: keep = !spec.without_gender; break;
    }
    if (keep && spec.without_median_mode && (ends_with(name, "_median") || ends_with(name, "_mode"))) {
      keep = false;
    }
    if (!keep) continue;
    const auto g = column_group(name);
    if (g != FeatureGroup::age && g != FeatureGroup::gender) has_sensor = true;
    out.push_back(c);
  }
  if (!has_sensor) {
    throw SpecError("feature set \"" + spec.name() + "\" selects no sensor columns of this dataset");
  }
  return out;
}

FeatureMatrix select_features(const FeatureMatrix& m, const FeatureSetSpec& spec) {
  const auto idx = resolve_feature_set(m.column_names(), spec);
  return m.subset_columns(idx);
}

}  // namespace emowatch
