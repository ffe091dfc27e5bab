// Copyright 2026 The Foley Eval Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "foley/config.hpp"

#include <charconv>
#include <cmath>
#include <set>

#include <fmt/format.h>

namespace foley {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

class TomlParser {
 public:
  TomlParser(std::string_view text, std::string_view source) : s_(text), source_(source) {}

  json parse() {
    json root = json::object();
    json* table = &root;
    std::set<std::string> defined_tables;
    while (true) {
      skip_blank_lines();
      if (eof()) break;
      if (peek() == '[') {
        ++i_;
        if (peek() == '[') fail("arrays of tables are not supported");
        std::vector<std::string> path;
        while (true) {
          skip_ws();
          path.push_back(key());
          skip_ws();
          if (peek() == '.') {
            ++i_;
            continue;
          }
          if (peek() != ']') fail("expected ']' after table name");
          ++i_;
          break;
        }
        std::string joined;
        table = &root;
        for (const auto& p : path) {
          joined += (joined.empty() ? "" : ".") + p;
          json& next = (*table)[p];
          if (next.is_null()) next = json::object();
          if (!next.is_object()) fail(fmt::format("'{}' is already a value", joined));
          table = &next;
        }
        if (!defined_tables.insert(joined).second) fail(fmt::format("table [{}] defined twice", joined));
        end_of_line();
        continue;
      }
      const std::string k = key();
      skip_ws();
      if (peek() == '.') fail("dotted keys are not supported");
      if (peek() != '=') fail(fmt::format("expected '=' after key '{}'", k));
      ++i_;
      skip_ws();
      json v = value();
      if (table->contains(k)) fail(fmt::format("duplicate key '{}'", k));
      (*table)[k] = std::move(v);
      end_of_line();
    }
    return root;
  }

 private:
  bool eof() const { return i_ >= s_.size(); }
  char peek() const { return eof() ? '\0' : s_[i_]; }

  [[noreturn]] void fail(const std::string& msg) const { throw Error(fmt::format("{}:{}: {}", source_, line_, msg)); }

  void skip_ws() {
    while (!eof() && (peek() == ' ' || peek() == '\t')) ++i_;
  }
  void skip_comment() {
    if (peek() == '#') {
      while (!eof() && peek() != '\n') ++i_;
    }
  }
  void skip_blank_lines() {
    while (!eof()) {
      skip_ws();
      skip_comment();
      if (peek() == '\r') ++i_;
      if (peek() != '\n') return;
      ++i_;
      ++line_;
    }
  }
  void end_of_line() {
    skip_ws();
    skip_comment();
    if (peek() == '\r') ++i_;
    if (eof()) return;
    if (peek() != '\n') fail(fmt::format("unexpected '{}' after value", peek()));
    ++i_;
    ++line_;
  }

  std::string key() {
    if (peek() == '"') return basic_string();
    if (peek() == '\'') return literal_string();
    std::string k;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-')) k += s_[i_++];
    if (k.empty()) fail("expected a key");
    return k;
  }

  std::string basic_string() {
    ++i_;
    if (s_.substr(i_, 2) == "\"\"") fail("multi-line strings are not supported");
    std::string out;
    while (true) {
      if (eof() || peek() == '\n') fail("unterminated string");
      char c = s_[i_++];
      if (c == '"') return out;
      if (c != '\\') {
        out += c;
        continue;
      }
      if (eof()) fail("unterminated string");
      c = s_[i_++];
      switch (c) {
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case 'r': out += '\r'; break;
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        default: fail(fmt::format("unsupported escape '\\{}'", c));
      }
    }
  }

  std::string literal_string() {
    ++i_;
    std::string out;
    while (true) {
      if (eof() || peek() == '\n') fail("unterminated string");
      const char c = s_[i_++];
      if (c == '\'') return out;
      out += c;
    }
  }

  json value() {
    const char c = peek();
    if (c == '"') return basic_string();
    if (c == '\'') return literal_string();
    if (c == '[') return array();
    if (c == '{') fail("inline tables are not supported");
    std::string tok;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || std::string_view("+-._").find(peek()) !=
                                                                               std::string_view::npos)) {
      tok += s_[i_++];
    }
    if (tok.empty()) fail("expected a value");
    if (tok == "true") return true;
    if (tok == "false") return false;
    std::string digits;
    for (char d : tok) {
      if (d != '_') digits += d;
    }
    const std::string_view body = (digits[0] == '+' || digits[0] == '-') ? std::string_view(digits).substr(1) : digits;
    if (body == "inf" || body == "nan") {
      const double v = body == "inf" ? INFINITY : NAN;
      return digits[0] == '-' ? -v : v;
    }
    const bool is_float = digits.find_first_of(".eE") != std::string::npos;
    if (is_float) {
      char* end = nullptr;
      const double v = std::strtod(digits.c_str(), &end);
      if (end != digits.c_str() + digits.size()) fail(fmt::format("bad number '{}'", tok));
      return v;
    }
    std::int64_t v = 0;
    const char* begin = digits.c_str() + (digits[0] == '+' ? 1 : 0);
    auto [ptr, ec] = std::from_chars(begin, digits.c_str() + digits.size(), v);
    if (ec != std::errc() || ptr != digits.c_str() + digits.size()) fail(fmt::format("bad value '{}'", tok));
    return v;
  }

  json array() {
    ++i_;
    json out = json::array();
    while (true) {
      skip_blank_lines();
      if (peek() == ']') {
        ++i_;
        return out;
      }
      out.push_back(value());
      skip_blank_lines();
      if (peek() == ',') {
        ++i_;
        continue;
      }
      if (peek() != ']') fail("expected ',' or ']' in array");
    }
  }

  std::string_view s_;
  std::string source_;
  std::size_t i_ = 0;
  std::size_t line_ = 1;
};

class Reader {
 public:
  Reader(const json& j, fs::path base) : j_(j), base_(std::move(base)) {}

  const json* get(const std::string& table, const std::string& key) {
    used_.insert(table.empty() ? key : table + "." + key);
    const json* t = table.empty() ? &j_ : (j_.contains(table) ? &j_.at(table) : nullptr);
    if (!t || !t->is_object() || !t->contains(key)) return nullptr;
    return &t->at(key);
  }

  void str(const std::string& table, const std::string& key, std::string& out) {
    if (const json* v = get(table, key)) out = as<std::string>(*v, table, key);
  }
  void path(const std::string& table, const std::string& key, fs::path& out) {
    if (const json* v = get(table, key)) out = resolve(as<std::string>(*v, table, key));
  }
  void opt_path(const std::string& table, const std::string& key, std::optional<fs::path>& out) {
    if (const json* v = get(table, key)) {
      const auto s = as<std::string>(*v, table, key);
      if (!s.empty()) out = resolve(s);
    }
  }
  void size(const std::string& table, const std::string& key, std::size_t& out) {
    if (const json* v = get(table, key)) {
      if (!v->is_number_integer() || v->get<std::int64_t>() < 0) bad(table, key, "a non-negative integer");
      out = v->get<std::size_t>();
    }
  }
  void number(const std::string& table, const std::string& key, double& out) {
    if (const json* v = get(table, key)) {
      if (!v->is_number()) bad(table, key, "a number");
      out = v->get<double>();
    }
  }
  void boolean(const std::string& table, const std::string& key, bool& out) {
    if (const json* v = get(table, key)) {
      if (!v->is_boolean()) bad(table, key, "true or false");
      out = v->get<bool>();
    }
  }

  void check_unknown() const {
    for (const auto& [k, v] : j_.items()) {
      if (v.is_object()) {
        for (const auto& [k2, v2] : v.items()) {
          if (!used_.count(k + "." + k2)) throw Error(fmt::format("unknown config key '{}.{}'", k, k2));
        }
      } else if (!used_.count(k)) {
        throw Error(fmt::format("unknown config key '{}'", k));
      }
    }
  }

  [[noreturn]] static void bad(const std::string& table, const std::string& key, const char* what) {
    throw Error(fmt::format("config key '{}{}{}' must be {}", table, table.empty() ? "" : ".", key, what));
  }

 private:
  template <typename T>
  T as(const json& v, const std::string& table, const std::string& key) {
    if (!v.is_string()) bad(table, key, "a string");
    return v.get<T>();
  }
  fs::path resolve(const std::string& s) const {
    const fs::path p(s);
    return p.is_absolute() || base_.empty() ? p : base_ / p;
  }

  const json& j_;
  fs::path base_;
  std::set<std::string> used_;
};

}  // namespace

json parse_toml(std::string_view text, std::string_view source) { return TomlParser(text, source).parse(); }

json read_toml(const fs::path& path) { return parse_toml(read_file(path), path.string()); }

json PipelineConfig::canonical() const {
  auto p = [this](const fs::path& x) {
    if (!config_dir.empty() && !x.empty()) {
      const fs::path r = x.lexically_normal().lexically_relative(config_dir.lexically_normal());
      if (!r.empty() && *r.begin() != "..") return r.generic_string();
    }
    return x.generic_string();
  };
  auto op = [&](const std::optional<fs::path>& x) { return x ? json(p(*x)) : json(nullptr); };
  return {
      {"inputs", {{"manifest", p(manifest)}, {"submissions", p(submissions)}, {"raters", p(raters)}}},
      {"seed", seed ? json(*seed) : json(nullptr)},
      {"preprocess", {{"policy", policy == SegmentPolicy::kMaxRms ? "max-rms" : "first"}, {"expected_eval", expected_eval}}},
      {"embed",
       {{"backend", embed_backend},
        {"import_dir", op(import_dir)},
        {"model_id", import_model_id},
        {"dim", import_dim},
        {"frames_per_clip", import_frames}}},
      {"screen", {{"top_k", top_k}}},
      {"select", {{"k", k}, {"restarts", kmeans_restarts}, {"gap_seconds", gap_seconds}}},
      {"plan",
       {{"referents", referents},
        {"anchors_per_type", anchors_per_type},
        {"band", {band.band_lo, band.band_hi}},
        {"min_categories", band.min_categories}}},
      {"ratings",
       {{"weights", {weights.quality, weights.fit, weights.diversity}},
        {"combine", combine == CombineMode::kOverall ? "overall" : "per-category"},
        {"exclusion_threshold", exclusion.threshold},
        {"strict", exclusion.strict}}},
  };
}

std::string PipelineConfig::hash() const { return sha256_hex(canonical().dump()).substr(0, 16); }

Provenance PipelineConfig::provenance() const { return {hash(), seed.value_or(0), std::string(kToolVersion)}; }

std::uint64_t PipelineConfig::require_seed(std::string_view stage) const {
  if (!seed) throw Error(fmt::format("stage '{}' needs a seed (--seed or 'seed' in the config)", stage));
  return *seed;
}

PipelineConfig config_from_json(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw Error("config must be a table");
  PipelineConfig c;
  c.config_dir = base_dir;
  Reader r(j, base_dir);
  if (const json* v = r.get("", "seed")) {
    if (!v->is_number_integer() || v->get<std::int64_t>() < 0) Reader::bad("", "seed", "a non-negative integer");
    c.seed = v->get<std::uint64_t>();
  }
  c.work_dir = base_dir / c.work_dir;
  r.path("", "work_dir", c.work_dir);
  r.path("inputs", "manifest", c.manifest);
  r.path("inputs", "submissions", c.submissions);
  r.path("inputs", "raters", c.raters);
  r.opt_path("inputs", "released_scores", c.released_scores);

  std::string policy = "max-rms";
  r.str("preprocess", "policy", policy);
  auto pol = parse_segment_policy(policy);
  if (!pol) throw Error(fmt::format("unknown segment policy '{}' (max-rms, first)", policy));
  c.policy = *pol;
  r.size("preprocess", "expected_eval", c.expected_eval);

  r.str("embed", "backend", c.embed_backend);
  if (c.embed_backend != "builtin" && c.embed_backend != "import") {
    throw Error(fmt::format("unknown embed backend '{}' (builtin, import)", c.embed_backend));
  }
  r.opt_path("embed", "import_dir", c.import_dir);
  r.str("embed", "model_id", c.import_model_id);
  r.size("embed", "dim", c.import_dim);
  r.size("embed", "frames_per_clip", c.import_frames);

  r.size("screen", "top_k", c.top_k);
  r.size("select", "k", c.k);
  std::size_t restarts = static_cast<std::size_t>(c.kmeans_restarts);
  r.size("select", "restarts", restarts);
  c.kmeans_restarts = static_cast<int>(restarts);
  r.number("select", "gap_seconds", c.gap_seconds);

  r.size("plan", "referents", c.referents);
  r.size("plan", "anchors_per_type", c.anchors_per_type);
  if (const json* v = r.get("plan", "band")) {
    if (!v->is_array() || v->size() != 2 || !(*v)[0].is_number_integer() || !(*v)[1].is_number_integer()) {
      Reader::bad("plan", "band", "a two-integer array");
    }
    c.band.band_lo = (*v)[0].get<std::size_t>();
    c.band.band_hi = (*v)[1].get<std::size_t>();
  }
  r.size("plan", "min_categories", c.band.min_categories);

  if (const json* v = r.get("ratings", "weights")) {
    if (!v->is_array() || v->size() != 3) Reader::bad("ratings", "weights", "a three-number array");
    c.weights = parse_weights(fmt::format("{},{},{}", (*v)[0].get<double>(), (*v)[1].get<double>(), (*v)[2].get<double>()));
  }
  std::string combine = "overall";
  r.str("ratings", "combine", combine);
  auto mode = parse_combine_mode(combine);
  if (!mode) throw Error(fmt::format("unknown combine mode '{}' (overall, per-category)", combine));
  c.combine = *mode;
  r.size("ratings", "exclusion_threshold", c.exclusion.threshold);
  r.boolean("ratings", "strict", c.exclusion.strict);

  r.str("server", "listen", c.listen);
  r.str("server", "admin_token_env", c.admin_token_env);
  r.opt_path("server", "static_dir", c.static_dir);
  r.boolean("server", "fsync", c.fsync);

  std::string exec = "parallel";
  r.str("runtime", "exec", exec);
  if (exec == "serial") c.exec = Exec::kSerial;
  else if (exec != "parallel") throw Error(fmt::format("unknown exec mode '{}' (serial, parallel)", exec));

  r.check_unknown();
  if (c.k < 1) throw Error("select.k must be >= 1");
  if (c.top_k < 1) throw Error("screen.top_k must be >= 1");
  if (c.gap_seconds < 0.0) throw Error("select.gap_seconds must be >= 0");
  if (c.band.band_lo > c.band.band_hi) throw Error("plan.band must be [lo, hi] with lo <= hi");
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  return config_from_json(read_toml(path), path.parent_path());
}

std::pair<std::string, int> parse_listen(std::string_view listen) {
  const auto colon = listen.rfind(':');
  if (colon == std::string_view::npos) throw Error(fmt::format("listen address '{}' must be host:port", listen));
  int port = 0;
  const auto digits = listen.substr(colon + 1);
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), port);
  if (ec != std::errc() || ptr != digits.data() + digits.size() || port < 0 || port > 65535) {
    throw Error(fmt::format("bad port in '{}'", listen));
  }
  return {std::string(listen.substr(0, colon)), port};
}

}  // namespace foley
