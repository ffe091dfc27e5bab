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


#include "foley/fixture.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>

#include <fmt/format.h>
#include <httplib.h>
#include <json.hpp>
#include <unsupported/Eigen/FFT>

#include "foley/embed.hpp"
#include "foley/wav.hpp"

namespace foley {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Biquad {
  double b0 = 1, b1 = 0, b2 = 0, a1 = 0, a2 = 0;
  double x1 = 0, x2 = 0, y1 = 0, y2 = 0;

  double operator()(double x) {
    const double y = b0 * x + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
    x2 = x1;
    x1 = x;
    y2 = y1;
    y1 = y;
    return y;
  }
};

Biquad lowpass(double cutoff, double rate, double q) {
  const double w0 = kTwoPi * cutoff / rate;
  const double alpha = std::sin(w0) / (2.0 * q);
  const double c = std::cos(w0);
  const double a0 = 1.0 + alpha;
  Biquad f;
  f.b0 = (1.0 - c) / 2.0 / a0;
  f.b1 = (1.0 - c) / a0;
  f.b2 = f.b0;
  f.a1 = -2.0 * c / a0;
  f.a2 = (1.0 - alpha) / a0;
  return f;
}

Biquad bandpass(double center, double rate, double q) {
  const double w0 = kTwoPi * center / rate;
  const double alpha = std::sin(w0) / (2.0 * q);
  const double a0 = 1.0 + alpha;
  Biquad f;
  f.b0 = alpha / a0;
  f.b1 = 0.0;
  f.b2 = -alpha / a0;
  f.a1 = -2.0 * std::cos(w0) / a0;
  f.a2 = (1.0 - alpha) / a0;
  return f;
}

// 8th-order Butterworth as four biquads.
void butterworth_lowpass(std::vector<double>& x, double cutoff, double rate) {
  for (double q : {0.5098, 0.6013, 0.9000, 2.5629}) {
    Biquad f = lowpass(cutoff, rate, q);
    for (double& v : x) v = f(v);
  }
}

double noise(SeededRng& rng) { return 2.0 * rng.uniform() - 1.0; }

void add_harmonic_tone(std::vector<double>& x, double rate, double start, double dur, double f0, double glide,
                       int harmonics, double gain, double attack, double decay) {
  const auto n0 = static_cast<std::size_t>(start * rate);
  const auto n = static_cast<std::size_t>(dur * rate);
  double phase = 0.0;
  for (std::size_t i = 0; i < n && n0 + i < x.size(); ++i) {
    const double t = static_cast<double>(i) / rate;
    const double f = f0 * (1.0 + glide * t / dur);
    phase += kTwoPi * f / rate;
    double s = 0.0;
    for (int h = 1; h <= harmonics; ++h) {
      if (f * h < rate / 2.0) s += std::sin(phase * h) / h;
    }
    const double env = (1.0 - std::exp(-t / attack)) * std::exp(-t / decay);
    x[n0 + i] += gain * env * s;
  }
}

void add_noise_burst(std::vector<double>& x, double rate, double start, double dur, double decay, double gain,
                     SeededRng& rng, double smooth = 0.0) {
  const auto n0 = static_cast<std::size_t>(start * rate);
  const auto n = static_cast<std::size_t>(dur * rate);
  double y = 0.0;
  for (std::size_t i = 0; i < n && n0 + i < x.size(); ++i) {
    const double t = static_cast<double>(i) / rate;
    y = smooth * y + (1.0 - smooth) * noise(rng);
    x[n0 + i] += gain * std::exp(-t / decay) * y;
  }
}

double signal_power(const std::vector<double>& x) {
  double p = 0.0;
  for (double v : x) p += v * v;
  return x.empty() ? 0.0 : p / static_cast<double>(x.size());
}

std::vector<std::int16_t> quantize(const std::vector<double>& x) {
  std::vector<std::int16_t> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = static_cast<std::int16_t>(std::lround(std::clamp(x[i], -1.0, 1.0) * 32767.0));
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  write_file_atomic(path, text);
}

}  // namespace

std::vector<double> synth_sound(Category category, int rate, double seconds, double variety, SeededRng& rng) {
  const double fs_ = rate;
  std::vector<double> x(static_cast<std::size_t>(seconds * fs_), 0.0);
  auto param = [&](double base, double spread) { return base + variety * spread * noise(rng); };

  switch (category) {
    case Category::kDogBark: {
      const double period = param(0.9, 0.35);
      const double f0 = param(480.0, 220.0);
      const double dur = param(0.2, 0.08);
      for (double t = param(0.15, 0.1); t + dur < seconds; t += period) {
        add_harmonic_tone(x, fs_, t, dur, f0 * param(1.0, 0.15), -0.3, 7, 0.6, 0.008, dur / 3.0);
        add_noise_burst(x, fs_, t, dur * 0.6, dur / 5.0, 0.15, rng, 0.5);
      }
      break;
    }
    case Category::kFootstep: {
      const double period = param(0.55, 0.2);
      const double thump = param(85.0, 35.0);
      for (double t = param(0.1, 0.08); t + 0.15 < seconds; t += period * param(1.0, 0.1)) {
        add_harmonic_tone(x, fs_, t, 0.15, thump, -0.4, 2, 0.8, 0.002, 0.04);
        add_noise_burst(x, fs_, t, 0.12, param(0.03, 0.015), 0.5, rng, 0.85);
      }
      break;
    }
    case Category::kGunshot: {
      const double decay = param(0.3, 0.1);
      const double start = param(0.4, 0.3);
      add_noise_burst(x, fs_, start, seconds - start, decay, 1.0, rng, param(0.2, 0.1));
      add_harmonic_tone(x, fs_, start, std::min(1.5, seconds - start), param(55.0, 20.0), -0.5, 3, 0.8, 0.001,
                        decay * 0.8);
      break;
    }
    case Category::kKeyboard: {
      const double gap = param(0.14, 0.07);
      std::vector<double> clicks(x.size(), 0.0);
      for (double t = 0.05; t + 0.01 < seconds; t += gap * (0.6 + 0.8 * rng.uniform())) {
        add_noise_burst(clicks, fs_, t, 0.008, 0.002, 1.0, rng);
      }
      Biquad bp = bandpass(param(2800.0, 800.0), fs_, 2.0);
      for (std::size_t i = 0; i < x.size(); ++i) x[i] = 3.0 * bp(clicks[i]);
      break;
    }
    case Category::kMovingMotorVehicle: {
      const double f0 = param(55.0, 25.0);
      const double rise = param(0.25, 0.2);
      const double am = param(3.0, 2.0);
      double phase = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double t = static_cast<double>(i) / fs_;
        phase += kTwoPi * f0 * (1.0 + rise * t / seconds) / fs_;
        double s = 0.0;
        for (int h = 1; h <= 18; ++h) s += std::sin(phase * h) / h;
        x[i] = 0.4 * (1.0 + 0.3 * std::sin(kTwoPi * am * t)) * s;
      }
      add_noise_burst(x, fs_, 0.0, seconds, 1e9, 0.05, rng, 0.95);
      break;
    }
    case Category::kRain: {
      const double smooth = std::clamp(param(0.6, 0.3), 0.0, 0.95);
      add_noise_burst(x, fs_, 0.0, seconds, 1e9, 0.5, rng, smooth);
      const double rate_drops = param(30.0, 20.0);
      const auto drops = static_cast<std::size_t>(rate_drops * seconds);
      for (std::size_t d = 0; d < drops; ++d) {
        add_noise_burst(x, fs_, rng.uniform() * seconds, 0.01, 0.002, 0.8, rng);
      }
      break;
    }
    case Category::kSneezeCough: {
      const double start = param(0.4, 0.3);
      const double ah = param(0.6, 0.25);
      add_harmonic_tone(x, fs_, start, ah, param(260.0, 90.0), 0.35, 10, 0.5, 0.05, ah);
      add_noise_burst(x, fs_, start + ah, 0.4, param(0.1, 0.05), 0.9, rng, param(0.4, 0.3));
      break;
    }
  }
  butterworth_lowpass(x, std::min(4500.0, 0.4 * fs_), fs_);
  double peak = 0.0;
  for (double v : x) peak = std::max(peak, std::abs(v));
  if (peak > 0.0) {
    for (double& v : x) v *= 0.5 / peak;
  }
  return x;
}

std::vector<std::int16_t> synth_clip(Category category, double variety, double hiss, SeededRng& rng) {
  std::vector<double> x = synth_sound(category, kClipRate, kClipSeconds, variety, rng);
  if (hiss > 0.0) {
    const double sigma = std::sqrt(hiss * signal_power(x));
    for (double& v : x) v += sigma * rng.normal();
  }
  return quantize(x);
}

namespace perception {

double high_band_fraction(std::span<const std::int16_t> samples) {
  constexpr std::size_t kN = 1024;
  Eigen::FFT<double> fft;
  std::vector<double> frame(kN);
  std::vector<std::complex<double>> spectrum;
  double total = 0.0, high = 0.0;
  for (std::size_t start = 0; start + kN <= samples.size(); start += kN) {
    for (std::size_t i = 0; i < kN; ++i) {
      const double w = 0.5 - 0.5 * std::cos(kTwoPi * static_cast<double>(i) / kN);
      frame[i] = w * samples[start + i] / 32768.0;
    }
    fft.fwd(spectrum, frame);
    for (std::size_t k = 1; k <= kN / 2; ++k) {
      const double p = std::norm(spectrum[k]);
      const double hz = static_cast<double>(k) * kClipRate / kN;
      total += p;
      if (hz >= 7000.0) high += p;
    }
  }
  return total > 0.0 ? high / total : 0.0;
}

int quality_score(std::span<const std::int16_t> samples) {
  const double q = 9.5 - 60.0 * high_band_fraction(samples);
  return static_cast<int>(std::clamp(std::lround(q), 0L, 10L));
}

std::vector<double> profile(std::span<const std::int16_t> samples) {
  const std::vector<float> e = builtin_embed(samples);
  // Band means, then band deviations weighted x2 so temporal texture counts.
  std::vector<double> p(builtin::kDim, 0.0);
  for (std::size_t w = 0; w < builtin::kWindows; ++w) {
    for (std::size_t b = 0; b < builtin::kDim; ++b) {
      const double weight = b < builtin::kMelBands ? 1.0 : 2.0;
      p[b] += weight * e[w * builtin::kDim + b] / builtin::kWindows;
    }
  }
  return p;
}

double distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

Referents learn(const std::vector<std::vector<double>>& profiles) {
  Referents r;
  if (profiles.empty()) return r;
  r.centroid.assign(profiles[0].size(), 0.0);
  for (const auto& p : profiles) {
    for (std::size_t i = 0; i < p.size(); ++i) r.centroid[i] += p[i] / static_cast<double>(profiles.size());
  }
  double spread = 0.0;
  for (const auto& p : profiles) spread += distance(p, r.centroid) / static_cast<double>(profiles.size());
  r.spread = std::max(spread, 1e-6);
  return r;
}

int fit_score(const Referents& ref, const std::vector<double>& p) {
  const double f = 11.0 - 2.0 * distance(p, ref.centroid) / ref.spread;
  return static_cast<int>(std::clamp(std::lround(f), 0L, 10L));
}

double segment_spread(std::span<const std::int16_t> samples, double gap_seconds) {
  const auto gap = static_cast<std::size_t>(std::lround(gap_seconds * kClipRate));
  const std::size_t period = kClipSamples + gap;
  std::vector<std::vector<double>> profiles;
  for (std::size_t start = 0; start + kClipSamples <= samples.size(); start += period) {
    profiles.push_back(profile(samples.subspan(start, kClipSamples)));
  }
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    for (std::size_t j = i + 1; j < profiles.size(); ++j) {
      sum += distance(profiles[i], profiles[j]);
      ++pairs;
    }
  }
  return pairs ? sum / static_cast<double>(pairs) : 0.0;
}

int diversity_score(std::span<const std::int16_t> samples, double gap_seconds) {
  const double d = 1.2 * segment_spread(samples, gap_seconds);
  return static_cast<int>(std::clamp(std::lround(d), 0L, 10L));
}

}  // namespace perception

FixtureLayout make_fixture(const fs::path& out, std::uint64_t seed) {
  FixtureLayout f;
  f.root = out;
  f.manifest = out / "dataset" / "manifest.csv";
  f.submissions = out / "submissions";
  f.raters = out / "raters.csv";
  f.rater_scripts = out / "rater_scripts.json";
  f.config = out / "config.toml";
  f.expected_ranking = out / "expected_ranking.json";
  const fs::path audio = out / "dataset" / "audio";
  fs::create_directories(audio);

  const std::array<int, 5> rates = {16000, 22050, 32000, 44100, 48000};
  std::ostringstream manifest;
  manifest << "clip_id,path,category,source_recording_id,split,referent,anchor_quality,anchor_fit\n";
  auto add_row = [&](const std::string& id, Category c, std::string_view split, bool referent, std::string_view q,
                     std::string_view fit) {
    manifest << id << ",audio/" << id << ".wav," << category_name(c) << ",rec-" << id << ',' << split << ','
             << (referent ? 1 : 0) << ',' << q << ',' << fit << '\n';
  };

  for (Category c : kCategories) {
    const std::string cat(category_name(c));
    for (std::string_view split : {"development", "evaluation"}) {
      for (std::size_t i = 0; i < kFixtureClipsPerCategory; ++i) {
        const std::string id = fmt::format("{}-{}-{:02}", split == "development" ? "dev" : "eval", cat, i);
        SeededRng rng(derive_seed(seed, "dataset/" + id));
        const int rate = rates[rng.below(rates.size())];
        const int channels = 1 + static_cast<int>(rng.below(2));
        const double seconds = 2.5 + 3.5 * rng.uniform();
        const auto mono = quantize(synth_sound(c, rate, seconds, 1.0, rng));
        std::vector<std::int16_t> inter;
        inter.reserve(mono.size() * channels);
        for (auto s : mono) {
          for (int ch = 0; ch < channels; ++ch) inter.push_back(s);
        }
        write_wav_pcm16(audio / (id + ".wav"), inter, rate, channels);
        add_row(id, c, split, split == "development" && i < 6, "", "");
      }
    }
    // Off-category anchors come from the two recipes that sound least like `c`.
    const bool stationary = c == Category::kMovingMotorVehicle || c == Category::kRain;
    const std::array<Category, 2> far = stationary ? std::array{Category::kDogBark, Category::kKeyboard}
                                                   : std::array{Category::kMovingMotorVehicle, Category::kRain};
    for (int j = 0; j < 4; ++j) {
      const Category other = far[static_cast<std::size_t>(j) % 2];
      struct AnchorKind {
        const char* tag;
        Category source;
        double hiss;
        const char* q;
        const char* fit;
      };
      for (const AnchorKind& a : {AnchorKind{"hl", other, 0.0, "high", "low"}, AnchorKind{"hh", c, 0.0, "high", "high"},
                                  AnchorKind{"ll", other, 0.8, "low", "low"}}) {
        const std::string id = fmt::format("anchor-{}-{}-{}", cat, a.tag, j);
        SeededRng rng(derive_seed(seed, "dataset/" + id));
        write_wav_pcm16(audio / (id + ".wav"), synth_clip(a.source, 0.6, a.hiss, rng), kClipRate, 1);
        add_row(id, c, "evaluation", false, a.q, a.fit);
      }
    }
  }
  write_text(f.manifest, manifest.str());

  struct MockSystem {
    const char* id;
    const char* team;
    double variety;
    double hiss;
  };
  for (const MockSystem& s : {MockSystem{"sys_good", "team_good", 1.0, 0.0}, MockSystem{"sys_poor", "team_poor", 0.08, 0.5}}) {
    const fs::path dir = f.submissions / s.id;
    write_text(dir / "system.json", json{{"system_id", s.id}, {"track", "A"}, {"team_id", s.team}}.dump(1) + "\n");
    for (Category c : kCategories) {
      fs::create_directories(dir / category_name(c));
      for (std::size_t i = 0; i < kFixtureClipsPerCategory; ++i) {
        SeededRng rng(derive_seed(seed, fmt::format("{}/{}/{}", s.id, category_name(c), i)));
        write_wav_pcm16(dir / category_name(c) / fmt::format("{:02}.wav", i), synth_clip(c, s.variety, s.hiss, rng),
                        kClipRate, 1);
      }
    }
  }

  std::ostringstream raters;
  raters << "rater_id,team_id,max_categories,role\n";
  for (int i = 1; i <= 6; ++i) raters << fmt::format("r{:02},,4,rating\n", i);
  raters << "r07,,4,rating\n";
  raters << "r08,team_good,4,rating\n";
  raters << "d01,,7,diversity\nd02,,7,diversity\n";
  write_text(f.raters, raters.str());

  const json scripts = {{"raters",
                         {{{"rater_id", "r07"}, {"behaviour", "confused"}},
                          {{"rater_id", "r08"}, {"behaviour", "self"}, {"team_id", "team_good"}}}}};
  write_text(f.rater_scripts, scripts.dump(1) + "\n");

  write_text(f.config, fmt::format(R"(# Mock challenge: 2 systems x 7 categories x {} clips.
seed = {}
work_dir = "work"

[inputs]
manifest = "dataset/manifest.csv"
submissions = "submissions"
raters = "raters.csv"

[preprocess]
expected_eval = {}

[screen]
top_k = 4

[select]
k = 5
restarts = 10
gap_seconds = 0.5

[plan]
referents = 6
anchors_per_type = 4
band = [3, 5]
min_categories = 4

[ratings]
weights = [1.0, 1.0, 0.5]
combine = "overall"
exclusion_threshold = 5
)",
                                   kFixtureClipsPerCategory, seed, kFixtureClipsPerCategory));

  write_text(f.expected_ranking, json{{"tracks", {{"A", {"sys_good", "sys_poor"}}}},
                                      {"excluded_raters", {"r07"}},
                                      {"self_rating_team", "team_good"}}
                                         .dump(1) +
                                     "\n");
  return f;
}

ScriptedRaterOptions load_scripted_raters(const PipelineConfig& cfg) {
  ScriptedRaterOptions o;
  o.seed = cfg.seed.value_or(0);
  o.gap_seconds = cfg.gap_seconds;
  const fs::path scripts = cfg.raters.parent_path() / "rater_scripts.json";
  if (fs::exists(scripts)) {
    const json j = json::parse(read_file(scripts));
    for (const auto& r : j.at("raters")) {
      ScriptedRater s;
      s.rater_id = r.at("rater_id").get<std::string>();
      const std::string b = r.value("behaviour", "normal");
      if (b == "confused") s.behaviour = RaterBehaviour::kConfused;
      else if (b == "self") s.behaviour = RaterBehaviour::kSelfRater;
      else if (b != "normal") throw Error(fmt::format("{}: unknown rater behaviour '{}'", scripts.string(), b));
      s.team_id = r.value("team_id", "");
      o.raters.push_back(std::move(s));
    }
  }
  std::set<std::string> teams;
  for (const auto& r : o.raters) {
    if (r.behaviour == RaterBehaviour::kSelfRater) teams.insert(r.team_id);
  }
  if (!teams.empty()) {
    for (const auto& s : discover_submissions(cfg.submissions)) {
      if (!teams.count(s.team_id)) continue;
      for (const auto& c : list_submission_clips(s)) {
        o.team_clip_hashes[s.team_id].insert(pcm_hash(read_wav_pcm16(c.path).samples));
      }
    }
  }
  return o;
}

namespace {

json expect_json(const httplib::Result& res, std::string_view what) {
  if (!res) throw Error(fmt::format("{}: request failed ({})", what, httplib::to_string(res.error())));
  if (res->status < 200 || res->status >= 300) {
    throw Error(fmt::format("{}: HTTP {} {}", what, res->status, res->body));
  }
  return json::parse(res->body);
}

int jitter(int v, SeededRng& rng) {
  const auto r = rng.below(4);
  const int d = r == 0 ? -1 : (r == 3 ? 1 : 0);
  return std::clamp(v + d, kScaleMin, kScaleMax);
}

}  // namespace

void run_scripted_raters(const std::string& base_url, const ListeningPlan& plan, const ScriptedRaterOptions& options) {
  httplib::Client cli(base_url);
  cli.set_read_timeout(60, 0);
  std::map<std::string, const ScriptedRater*> scripts;
  for (const auto& r : options.raters) scripts[r.rater_id] = &r;

  for (const auto& rater : plan.raters) {
    const ScriptedRater* script = scripts.count(rater.rater_id) ? scripts[rater.rater_id] : nullptr;
    const RaterBehaviour behaviour = script ? script->behaviour : RaterBehaviour::kNormal;
    for (const auto& sp : plan.sessions) {
      if (sp.rater_id != rater.rater_id) continue;
      const json created = expect_json(
          cli.Post("/api/sessions", json{{"rater_id", rater.rater_id}, {"category", sp.category}}.dump(),
                   "application/json"),
          "create session");
      const std::string sid = created.at("session_id").get<std::string>();
      std::vector<std::vector<double>> referents;
      std::optional<perception::Referents> learned;
      while (true) {
        const json next = expect_json(cli.Get("/api/sessions/" + sid + "/next"), "next trial");
        if (next.at("type") != "trial") break;
        const std::string trial_id = next.at("trial_id").get<std::string>();
        const std::string kind = next.at("kind").get<std::string>();
        const auto audio = cli.Get(next.at("audio_url").get<std::string>());
        if (!audio || audio->status != 200) throw Error(fmt::format("audio for {} unavailable", trial_id));
        const Pcm16Audio pcm = decode_wav_pcm16(audio->body);
        SeededRng rng(derive_seed(options.seed, rater.rater_id + "/" + sid + "/" + trial_id));

        json body = {{"trial_id", trial_id}, {"listen_count", 1}};
        if (kind == "referent") {
          referents.push_back(perception::profile(pcm.samples));
        } else if (kind == "diversity") {
          body["diversity"] = jitter(perception::diversity_score(pcm.samples, options.gap_seconds), rng);
        } else {
          if (!learned) learned = perception::learn(referents);
          int q = jitter(perception::quality_score(pcm.samples), rng);
          int f = jitter(perception::fit_score(*learned, perception::profile(pcm.samples)), rng);
          if (behaviour == RaterBehaviour::kConfused) {
            std::swap(q, f);
            if (q >= 6 && f >= 6) q = f = 5;
          } else if (behaviour == RaterBehaviour::kSelfRater) {
            auto it = options.team_clip_hashes.find(script->team_id);
            if (it != options.team_clip_hashes.end() && it->second.count(pcm_hash(pcm.samples))) q = f = 10;
          }
          body["quality"] = q;
          body["fit"] = f;
        }
        expect_json(cli.Post("/api/sessions/" + sid + "/responses", body.dump(), "application/json"),
                    "submit " + trial_id);
      }
    }
  }
}

RaterHook scripted_rater_hook(const PipelineConfig& cfg) {
  auto options = std::make_shared<ScriptedRaterOptions>(load_scripted_raters(cfg));
  return [options](const std::string& base_url, const ListeningPlan& plan) {
    run_scripted_raters(base_url, plan, *options);
  };
}

}  // namespace foley
