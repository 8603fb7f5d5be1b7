#include "xview/datamodel.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "xview/error.hpp"
#include "xview/rng.hpp"

namespace xview {

using nlohmann::json;

std::string to_string(View v) {
  switch (v) {
    case View::ego: return "ego";
    case View::side: return "side";
    case View::top: return "top";
  }
  throw Error("unknown view");
}

View view_from_string(const std::string& s) {
  if (s == "ego") return View::ego;
  if (s == "side") return View::side;
  if (s == "top") return View::top;
  throw Error("unknown view: " + s);
}

std::string Augmentation::str() const {
  switch (kind) {
    case Kind::none: return "none";
    case Kind::hflip: return "hflip";
    case Kind::rot: return "rot" + std::to_string(k);
  }
  throw Error("unknown augmentation");
}

Augmentation Augmentation::parse(const std::string& s) {
  if (s == "none") return {};
  if (s == "hflip") return {Kind::hflip, 0};
  if (s.rfind("rot", 0) == 0) {
    const int k = std::stoi(s.substr(3));
    if (k < 1 || k > 11)
      throw Error("augmentation rot(k) requires k in 1..11, got " + s);
    return {Kind::rot, k};
  }
  throw Error("unknown augmentation: " + s);
}

const ClipRef& Dataset::clip(const std::string& clip_id) const {
  for (const auto& c : clips)
    if (c.clip_id == clip_id) return c;
  throw Error("unknown clip '" + clip_id + "'");
}

bool Dataset::has_clip(const std::string& clip_id) const {
  return std::any_of(clips.begin(), clips.end(),
                     [&](const ClipRef& c) { return c.clip_id == clip_id; });
}

std::vector<std::string> Dataset::paired_video_ids() const {
  std::set<std::string> ids;
  for (const auto& p : pairs) {
    ids.insert(clip(p.ego).video_id);
    ids.insert(clip(p.exo).video_id);
  }
  return {ids.begin(), ids.end()};
}

std::string Dataset::split_of_video(const std::string& video_id) const {
  for (const auto& [name, vids] : splits)
    if (std::find(vids.begin(), vids.end(), video_id) != vids.end()) return name;
  return "";
}

void Dataset::validate() const {
  std::unordered_map<std::string, const ClipRef*> by_id;
  for (const auto& c : clips) {
    if (!by_id.emplace(c.clip_id, &c).second)
      throw Error("duplicate clip_id '" + c.clip_id + "'");
    if (c.frame_count < 2)
      throw Error("clip '" + c.clip_id + "': frame_count must be >= 2");
  }
  for (const auto& p : pairs) {
    auto ego_it = by_id.find(p.ego);
    if (ego_it == by_id.end())
      throw Error("pair references missing clip_id '" + p.ego + "'");
    auto exo_it = by_id.find(p.exo);
    if (exo_it == by_id.end())
      throw Error("pair references missing clip_id '" + p.exo + "'");
    if (ego_it->second->view != View::ego)
      throw Error("pair (" + p.ego + ", " + p.exo + "): ego clip has view " +
                  to_string(ego_it->second->view));
    if (exo_it->second->view != p.view)
      throw Error("pair (" + p.ego + ", " + p.exo + "): exo clip view " +
                  to_string(exo_it->second->view) + " != pair view " + to_string(p.view));
    if (p.augmentation.kind == Augmentation::Kind::rot && p.view != View::top)
      throw Error("pair (" + p.ego + ", " + p.exo + "): rot(k) only valid for top view");
  }
  // Video-level disjointness across splits.
  std::unordered_map<std::string, std::string> assigned;
  for (const auto& [name, vids] : splits) {
    for (const auto& v : vids) {
      auto [it, inserted] = assigned.emplace(v, name);
      if (!inserted)
        throw Error("video '" + v + "' appears in splits '" + it->second + "' and '" + name + "'");
    }
  }
}

void Dataset::canonicalize() {
  std::sort(clips.begin(), clips.end(),
            [](const ClipRef& a, const ClipRef& b) { return a.clip_id < b.clip_id; });
  std::sort(pairs.begin(), pairs.end(), [](const ClipPair& a, const ClipPair& b) {
    return std::tie(a.ego, a.exo) < std::tie(b.ego, b.exo);
  });
  for (auto& [name, vids] : splits) std::sort(vids.begin(), vids.end());
}

namespace {

ClipRef clip_from_json(const json& j) {
  ClipRef c;
  try {
    c.clip_id = j.at("clip_id").get<std::string>();
    c.video_id = j.at("video_id").get<std::string>();
    c.view = view_from_string(j.at("view").get<std::string>());
    c.actor = j.value("actor", "");
    c.action = j.value("action", "");
    c.frame_count = j.value("frame_count", 16);
    if (j.contains("feature_keys"))
      c.feature_keys = j.at("feature_keys").get<std::map<std::string, std::string>>();
  } catch (const json::exception& e) {
    throw Error("clip entry '" + j.value("clip_id", "?") + "': " + e.what());
  }
  return c;
}

json clip_to_json(const ClipRef& c) {
  json j;
  j["clip_id"] = c.clip_id;
  j["video_id"] = c.video_id;
  j["view"] = to_string(c.view);
  j["actor"] = c.actor;
  j["action"] = c.action;
  j["frame_count"] = c.frame_count;
  j["feature_keys"] = c.feature_keys;
  return j;
}

}  // namespace

Dataset load_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open manifest: " + path);
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    throw Error("manifest parse error in " + path + ": " + e.what());
  }
  Dataset d;
  try {
    for (const auto& cj : j.at("clips")) d.clips.push_back(clip_from_json(cj));
    for (const auto& pj : j.at("pairs")) {
      ClipPair p;
      p.ego = pj.at("ego").get<std::string>();
      p.exo = pj.at("exo").get<std::string>();
      p.view = view_from_string(pj.at("view").get<std::string>());
      p.augmentation = Augmentation::parse(pj.value("augmentation", "none"));
      d.pairs.push_back(p);
    }
    if (j.contains("splits"))
      d.splits = j.at("splits").get<std::map<std::string, std::vector<std::string>>>();
  } catch (const json::exception& e) {
    throw Error("manifest field error in " + path + ": " + e.what());
  }
  d.validate();
  return d;
}

void save_manifest(const Dataset& d, const std::string& path) {
  Dataset canon = d;
  canon.canonicalize();
  json j;
  j["clips"] = json::array();
  for (const auto& c : canon.clips) j["clips"].push_back(clip_to_json(c));
  j["pairs"] = json::array();
  for (const auto& p : canon.pairs) {
    json pj;
    pj["ego"] = p.ego;
    pj["exo"] = p.exo;
    pj["view"] = to_string(p.view);
    pj["augmentation"] = p.augmentation.str();
    j["pairs"].push_back(pj);
  }
  j["splits"] = canon.splits;
  std::ofstream os(path);
  if (!os) throw Error("cannot open for writing: " + path);
  os << j.dump(2) << "\n";
}

void split_dataset(Dataset& d, const SplitCounts& counts, std::uint64_t seed) {
  for (const auto& [name, vids] : d.splits)
    if (!vids.empty())
      throw Error("split_dataset: splits already populated ('" + name + "')");

  const std::vector<std::string> videos = d.paired_video_ids();

  // Videos joined by a pair move together; group them with union-find.
  std::unordered_map<std::string, int> vid_index;
  for (std::size_t i = 0; i < videos.size(); ++i)
    vid_index[videos[i]] = static_cast<int>(i);
  std::vector<int> parent(videos.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  for (const auto& p : d.pairs) {
    const int a = find(vid_index.at(d.clip(p.ego).video_id));
    const int b = find(vid_index.at(d.clip(p.exo).video_id));
    if (a != b) parent[a] = b;
  }
  std::map<int, std::vector<std::string>> groups;
  for (std::size_t i = 0; i < videos.size(); ++i)
    groups[find(static_cast<int>(i))].push_back(videos[i]);
  std::vector<std::vector<std::string>> group_list;
  for (auto& [root, vids] : groups) group_list.push_back(std::move(vids));

  const int total = static_cast<int>(videos.size());
  if (counts.train + counts.val + counts.test != total)
    throw Error("split counts sum to " +
                std::to_string(counts.train + counts.val + counts.test) +
                " but dataset has " + std::to_string(total) + " paired videos");

  Rng rng = Rng(seed).stream("split");
  rng.shuffle(group_list);

  std::vector<std::pair<std::string, int>> quota = {
      {"train", counts.train}, {"val", counts.val}, {"test", counts.test}};
  d.splits = {{"train", {}}, {"val", {}}, {"test", {}}};
  std::size_t qi = 0;
  for (const auto& grp : group_list) {
    while (qi < quota.size() &&
           static_cast<int>(d.splits[quota[qi].first].size()) >= quota[qi].second)
      ++qi;
    if (qi >= quota.size())
      throw Error("split_dataset: grouped videos do not fit the requested counts");
    auto& dst = d.splits[quota[qi].first];
    if (static_cast<int>(dst.size() + grp.size()) > quota[qi].second)
      throw Error("split_dataset: video group of size " + std::to_string(grp.size()) +
                  " does not fit split '" + quota[qi].first + "'");
    dst.insert(dst.end(), grp.begin(), grp.end());
  }
  d.canonicalize();
  d.validate();
}

std::vector<FeaturePair> enumerate_feature_pairs(const Dataset& d,
                                                 const std::string& split,
                                                 const std::string& feature_kind,
                                                 const FeatureMatrix& store) {
  auto split_it = d.splits.find(split);
  if (split_it == d.splits.end()) throw Error("unknown split '" + split + "'");
  std::set<std::string> members(split_it->second.begin(), split_it->second.end());

  auto storage_key = [&](const ClipRef& c) -> std::string {
    auto it = c.feature_keys.find(feature_kind);
    return it != c.feature_keys.end() ? it->second : c.clip_id;
  };

  std::vector<const ClipPair*> selected;
  for (const auto& p : d.pairs) {
    if (members.count(d.clip(p.ego).video_id)) selected.push_back(&p);
  }
  std::sort(selected.begin(), selected.end(), [](const ClipPair* a, const ClipPair* b) {
    return std::tie(a->ego, a->exo) < std::tie(b->ego, b->exo);
  });

  std::vector<FeaturePair> out;
  out.reserve(selected.size());
  for (const ClipPair* p : selected) {
    const ClipRef& ego = d.clip(p->ego);
    const ClipRef& exo = d.clip(p->exo);
    FeaturePair fp;
    fp.ego_id = p->ego;
    fp.exo_id = p->exo;
    fp.view = p->view;
    fp.augmentation = p->augmentation;
    const std::string ego_key = storage_key(ego);
    const std::string exo_key = storage_key(exo);
    if (!store.has(ego_key))
      throw Error("missing feature for clip '" + p->ego + "' (kind " + feature_kind + ")");
    if (!store.has(exo_key))
      throw Error("missing feature for clip '" + p->exo + "' (kind " + feature_kind + ")");
    fp.source = store.row(ego_key);
    fp.target = store.row(exo_key);
    out.push_back(std::move(fp));
  }
  return out;
}

}  // namespace xview
