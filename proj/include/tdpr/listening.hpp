#pragma once

// Listening-test backend: session manifests, blinding, response validation
// and aggregation. Transport lives in listening_server.hpp.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <istream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "tdpr/error.hpp"
#include "tdpr/rng.hpp"

namespace tdpr::listening {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

enum class Protocol { kAB, kMOS };

inline std::string_view to_string(Protocol p) { return p == Protocol::kAB ? "AB" : "MOS"; }

inline Protocol parse_protocol(std::string_view s) {
  if (s == "AB") return Protocol::kAB;
  if (s == "MOS") return Protocol::kMOS;
  throw Error("unknown protocol '" + std::string(s) + "' (expected AB or MOS)");
}

inline constexpr std::string_view kAbQuestion = "Choose the one containing fewer artifacts.";
inline constexpr std::string_view kMosQuestion = "Rate each sample by its similarity to the reference.";

struct Stimulus {
  std::string condition;  // never served
  std::filesystem::path path;
};

struct Trial {
  std::string id;
  bool is_practice = false;
  std::optional<std::filesystem::path> reference;  // MOS only
  std::vector<Stimulus> stimuli;                   // AB: exactly two
};

/// On-disk manifest: the only place that maps stimuli to conditions.
struct Session {
  std::string id;
  Protocol protocol = Protocol::kAB;
  bool randomize = true;
  json participant_fields = json::array();
  std::vector<Trial> trials;
};

inline void validate(const Session& s) {
  if (s.id.empty()) throw Error("session: empty id");
  if (s.trials.empty()) throw Error("session '" + s.id + "': no trials");
  std::vector<std::string> ids;
  for (const auto& t : s.trials) {
    if (t.id.empty()) throw Error("session '" + s.id + "': trial with empty id");
    ids.push_back(t.id);
    if (s.protocol == Protocol::kAB) {
      if (t.stimuli.size() != 2) throw Error("session '" + s.id + "': AB trial '" + t.id + "' needs two stimuli");
      if (t.reference) throw Error("session '" + s.id + "': AB trial '" + t.id + "' has a reference");
    } else {
      if (t.stimuli.empty()) throw Error("session '" + s.id + "': MOS trial '" + t.id + "' has no stimuli");
      if (!t.reference) throw Error("session '" + s.id + "': MOS trial '" + t.id + "' needs a reference");
    }
  }
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) throw Error("session '" + s.id + "': duplicate trial ids");
  if (s.protocol == Protocol::kAB) {
    if (!s.trials.front().is_practice) throw Error("session '" + s.id + "': AB sessions start with a practice trial");
    const auto evals = std::count_if(s.trials.begin(), s.trials.end(), [](const Trial& t) { return !t.is_practice; });
    if (evals == 0) throw Error("session '" + s.id + "': no evaluation trials");
  }
}

/// Reads a manifest. Relative audio paths resolve against the manifest's directory.
inline Session parse_session(const json& j, const std::filesystem::path& base_dir = {}) {
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  };
  Session s;
  s.id = j.at("id").get<std::string>();
  s.protocol = parse_protocol(j.at("protocol").get<std::string>());
  s.randomize = j.value("randomize", true);
  s.participant_fields = j.value("participant_fields", json::array());
  for (const auto& jt : j.at("trials")) {
    Trial t;
    t.id = jt.at("id").get<std::string>();
    t.is_practice = jt.value("practice", false);
    if (jt.contains("reference")) t.reference = resolve(jt.at("reference").get<std::string>());
    for (const auto& js : jt.at("stimuli")) {
      t.stimuli.push_back({js.at("condition").get<std::string>(), resolve(js.at("path").get<std::string>())});
    }
    s.trials.push_back(std::move(t));
  }
  validate(s);
  return s;
}

inline Session load_session(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw Error("cannot open session manifest '" + manifest.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error("session manifest '" + manifest.string() + "': " + e.what());
  }
  return parse_session(j, manifest.parent_path());
}

namespace detail {

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Keyed hash over a list of fields; mixing between fields keeps ("ab","c") != ("a","bc").
inline std::uint64_t keyed_hash(std::uint64_t key, std::initializer_list<std::string_view> parts) {
  std::uint64_t h = CounterRng::mix(key);
  for (auto p : parts) h = CounterRng::mix(fnv1a(p, h ^ 0x1f));
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace detail

/// Where a served token points.
struct AudioRef {
  std::string session_id;
  std::string trial_id;
  int stimulus = -1;  // -1: the MOS reference
  std::filesystem::path path;
};

/// Sessions plus the per-deployment key that drives tokens and presentation order.
class Registry {
 public:
  explicit Registry(std::uint64_t key) : key_(key) {}

  void add(Session s) {
    validate(s);
    if (sessions_.count(s.id)) throw Error("duplicate session id '" + s.id + "'");
    for (const auto& t : s.trials) {
      if (t.reference) register_token(s.id, t, -1, *t.reference);
      for (std::size_t i = 0; i < t.stimuli.size(); ++i) register_token(s.id, t, static_cast<int>(i), t.stimuli[i].path);
    }
    sessions_.emplace(s.id, std::move(s));
  }

  const Session* find(const std::string& id) const {
    auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : &it->second;
  }

  const AudioRef* audio(const std::string& token) const {
    auto it = tokens_.find(token);
    return it == tokens_.end() ? nullptr : &it->second;
  }

  std::string token(const std::string& session_id, const std::string& trial_id, int stimulus) const {
    const auto idx = std::to_string(stimulus);
    return detail::hex64(detail::keyed_hash(key_, {"tok", session_id, trial_id, idx})) +
           detail::hex64(detail::keyed_hash(key_ ^ 0x5bd1e995ULL, {"tok", session_id, trial_id, idx}));
  }

  /// Manifest order of stimuli as presented to `participant`.
  std::vector<int> presentation_order(const Session& s, const Trial& t, const std::string& participant) const {
    std::vector<int> order(t.stimuli.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    if (!s.randomize) return order;
    const CounterRng rng(detail::keyed_hash(key_, {"order", s.id, t.id, participant}), 0);
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(rng.uniform_int(i, 0, static_cast<std::int64_t>(i) - 1));
      std::swap(order[i - 1], order[j]);
    }
    return order;
  }

  /// The blinded manifest a participant sees: no condition labels, no paths.
  ordered_json served_manifest(const Session& s, const std::string& participant) const {
    ordered_json items = ordered_json::array();
    for (const auto& t : s.trials) {
      const auto order = presentation_order(s, t, participant);
      ordered_json item{{"id", t.id}, {"is_practice", t.is_practice}};
      if (s.protocol == Protocol::kAB) {
        item["sample_a"] = audio_url(s, t, order[0]);
        item["sample_b"] = audio_url(s, t, order[1]);
      } else {
        item["reference"] = audio_url(s, t, -1);
        ordered_json stimuli = ordered_json::array();
        for (int idx : order) stimuli.push_back({{"id", token(s.id, t.id, idx)}, {"audio", audio_url(s, t, idx)}});
        item["stimuli"] = std::move(stimuli);
      }
      items.push_back(std::move(item));
    }
    return ordered_json{
        {"id", s.id},
        {"protocol", std::string(to_string(s.protocol))},
        {"participant", participant},
        {"question", std::string(s.protocol == Protocol::kAB ? kAbQuestion : kMosQuestion)},
        {"randomize", s.randomize},
        {"participant_fields", ordered_json::parse(s.participant_fields.dump())},
        {"items", std::move(items)},
    };
  }

 private:
  std::string audio_url(const Session& s, const Trial& t, int idx) const {
    return "/api/audio/" + token(s.id, t.id, idx);
  }

  void register_token(const std::string& sid, const Trial& t, int idx, const std::filesystem::path& path) {
    tokens_.emplace(token(sid, t.id, idx), AudioRef{sid, t.id, idx, path});
  }

  std::uint64_t key_;
  std::map<std::string, Session> sessions_;
  std::map<std::string, AudioRef> tokens_;
};

/// Validates a submitted response against the registry and resolves the
/// blinded choice to a condition. Throws Error with a client-facing message.
inline ordered_json resolve_response(const Registry& reg, const json& body) {
  if (!body.is_object()) throw Error("response must be a JSON object");
  auto str = [&](const char* key) {
    if (!body.contains(key) || !body[key].is_string() || body[key].get<std::string>().empty()) {
      throw Error(std::string("missing or invalid '") + key + "'");
    }
    return body[key].get<std::string>();
  };
  const auto session_id = str("session");
  const auto participant = str("participant");
  const auto trial_id = str("trial");

  const Session* s = reg.find(session_id);
  if (s == nullptr) throw Error("unknown session '" + session_id + "'");
  const auto t_it = std::find_if(s->trials.begin(), s->trials.end(), [&](const Trial& t) { return t.id == trial_id; });
  if (t_it == s->trials.end()) throw Error("unknown trial '" + trial_id + "'");
  const Trial& t = *t_it;
  if (body.contains("protocol") && body["protocol"] != std::string(to_string(s->protocol))) {
    throw Error("protocol does not match session");
  }

  const auto order = reg.presentation_order(*s, t, participant);
  const json flags = body.value("playback_complete", json::object());
  if (!flags.is_object()) throw Error("'playback_complete' must be an object");
  auto played = [&](const std::string& key) { return flags.contains(key) && flags[key] == true; };

  ordered_json rec{{"session", session_id}, {"participant", participant}, {"trial", trial_id},
                   {"protocol", std::string(to_string(s->protocol))}};
  if (s->protocol == Protocol::kAB) {
    if (!played("A") || !played("B")) throw Error("both samples must be played to completion before answering");
    const json& c = body.value("choice", json());
    if (!c.is_string() || (c != "A" && c != "B")) throw Error("AB choice must be \"A\" or \"B\"");
    const int idx = order[c == "A" ? 0 : 1];
    rec["choice"] = c;
    rec["condition"] = t.stimuli[static_cast<std::size_t>(idx)].condition;
    rec["other_condition"] = t.stimuli[static_cast<std::size_t>(1 - idx)].condition;
  } else {
    const auto stim = str("stimulus");
    int idx = -1;
    for (std::size_t i = 0; i < t.stimuli.size(); ++i) {
      if (reg.token(session_id, trial_id, static_cast<int>(i)) == stim) idx = static_cast<int>(i);
    }
    if (idx < 0) throw Error("unknown stimulus for this trial");
    if (!played("reference")) throw Error("the reference must be played to completion before rating");
    for (std::size_t i = 0; i < t.stimuli.size(); ++i) {
      if (!played(reg.token(session_id, trial_id, static_cast<int>(i)))) {
        throw Error("all stimuli must be played to completion before rating");
      }
    }
    const json& c = body.value("choice", json());
    if (!c.is_number_integer() || c.get<int>() < 1 || c.get<int>() > 5) throw Error("MOS choice must be an integer 1-5");
    rec["stimulus"] = stim;
    rec["choice"] = c.get<int>();
    rec["condition"] = t.stimuli[static_cast<std::size_t>(idx)].condition;
  }
  rec["is_practice"] = t.is_practice;
  rec["playback_complete"] = flags;
  if (body.contains("timestamp")) rec["timestamp"] = body["timestamp"];
  rec["received_at"] = detail::utc_now();
  return rec;
}

/// Append-only JSON-lines sink; one writer at a time.
class ResultsLog {
 public:
  explicit ResultsLog(std::filesystem::path path) : path_(std::move(path)) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  }

  void append(const ordered_json& record) {
    const auto line = record.dump() + "\n";
    std::lock_guard lock(mu_);
    std::ofstream out(path_, std::ios::app | std::ios::binary);
    if (!out) throw Error("cannot open results file '" + path_.string() + "'");
    out << line;
    out.flush();
    if (!out) throw Error("write to results file '" + path_.string() + "' failed");
  }

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::mutex mu_;
};

inline std::vector<json> read_results(std::istream& in) {
  std::vector<json> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw Error("results line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

namespace detail {

// Linear interpolation between order statistics (the common "type 7" rule).
inline double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace detail

/// Per-condition summaries. Practice responses are dropped; a later record
/// for the same (session, participant, trial, stimulus) replaces an earlier one.
inline ordered_json aggregate(const std::vector<json>& records) {
  std::map<std::tuple<std::string, std::string, std::string, std::string>, const json*> latest;
  for (const auto& r : records) {
    if (r.value("is_practice", false)) continue;
    latest[{r.at("session").get<std::string>(), r.at("participant").get<std::string>(),
            r.at("trial").get<std::string>(), r.value("stimulus", std::string())}] = &r;
  }

  std::map<std::string, std::map<std::string, int>> trials_per_participant;  // protocol -> participant -> n
  std::map<std::string, std::pair<int, int>> ab;                               // condition -> (wins, appearances)
  std::map<std::string, std::vector<double>> mos;
  int ab_total = 0;
  std::map<std::string, std::set<std::pair<std::string, std::string>>> mos_trials;
  for (const auto& [key, r] : latest) {
    const auto protocol = r->at("protocol").get<std::string>();
    const auto& participant = std::get<1>(key);
    if (protocol == "AB") {
      ++ab_total;
      ++trials_per_participant["AB"][participant];
      const auto win = r->at("condition").get<std::string>();
      ab[win].first += 1;
      ab[win].second += 1;
      if (r->contains("other_condition")) ab[r->at("other_condition").get<std::string>()].second += 1;
    } else {
      mos[r->at("condition").get<std::string>()].push_back(r->at("choice").get<double>());
      mos_trials[participant].insert({std::get<0>(key), std::get<2>(key)});
    }
  }
  for (const auto& [participant, trials] : mos_trials) {
    trials_per_participant["MOS"][participant] = static_cast<int>(trials.size());
  }

  ordered_json out;
  if (!ab.empty()) {
    ordered_json conds = ordered_json::object();
    for (const auto& [cond, wa] : ab) {
      conds[cond] = {{"votes", wa.first},
                     {"appearances", wa.second},
                     {"preference_percent", 100.0 * wa.first / static_cast<double>(wa.second)}};
    }
    out["AB"] = {{"responses", ab_total}, {"trials_per_participant", trials_per_participant["AB"]},
                 {"conditions", conds}};
  }
  if (!mos.empty()) {
    ordered_json conds = ordered_json::object();
    for (auto& [cond, v] : mos) {
      std::sort(v.begin(), v.end());
      double sum = 0.0;
      for (double x : v) sum += x;
      conds[cond] = {{"n", v.size()},
                     {"mean", sum / static_cast<double>(v.size())},
                     {"min", v.front()},
                     {"q1", detail::quantile(v, 0.25)},
                     {"median", detail::quantile(v, 0.5)},
                     {"q3", detail::quantile(v, 0.75)},
                     {"max", v.back()}};
    }
    out["MOS"] = {{"trials_per_participant", trials_per_participant["MOS"]}, {"conditions", conds}};
  }
  return out;
}

inline ordered_json aggregate_file(const std::filesystem::path& results) {
  std::ifstream in(results);
  if (!in) throw Error("cannot open results file '" + results.string() + "'");
  return aggregate(read_results(in));
}

}  // namespace tdpr::listening
