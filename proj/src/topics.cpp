#include "hlta/topics.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>

#include "hlta/em.hpp"
#include "hlta/inference.hpp"
#include "json.hpp"

namespace hlta {

using ojson = nlohmann::ordered_json;

Topic label_topic(const std::string& latent, int level, const std::vector<WordJoint>& joints,
                  std::size_t top_k) {
  Topic topic;
  topic.latent = latent;
  topic.level = level;
  double pz[2] = {1.0, 0.0};
  if (!joints.empty()) {
    const auto& j = joints.front().joint;
    pz[0] = j[0] + j[1];
    pz[1] = j[2] + j[3];
  }
  struct Row {
    std::string word;
    double cond[2];  // P(w = 1 | z = k)
    double mi;
  };
  std::vector<Row> rows;
  for (const auto& wj : joints) {
    Row r{wj.word, {0.0, 0.0}, mutual_information(wj.joint)};
    for (int k = 0; k < 2; ++k) r.cond[k] = pz[k] > 0.0 ? wj.joint[2 * k + 1] / pz[k] : 0.0;
    rows.push_back(r);
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const Row& a, const Row& b) { return a.mi > b.mi; });
  double top[2] = {0.0, 0.0};
  for (std::size_t i = 0; i < std::min(kBackgroundWords, rows.size()); ++i)
    for (int k = 0; k < 2; ++k) top[k] += rows[i].cond[k];
  const int s1 = top[1] < top[0] ? 0 : 1;
  topic.size = pz[s1];
  topic.background_size = pz[1 - s1];
  const std::size_t keep = top_k == 0 ? rows.size() : std::min(top_k, rows.size());
  for (std::size_t i = 0; i < keep; ++i)
    topic.words.push_back({rows[i].word, rows[i].cond[s1], rows[i].cond[1 - s1], rows[i].mi});
  return topic;
}

Topic extract_topic(const LatentTreeModel& model, int z, std::size_t top_k) {
  if (!model.variable(z).latent())
    throw std::invalid_argument(model.name(z) + " is not a latent variable");
  const auto words = subtree_observed(model, z);
  if (words.empty()) throw InvariantError("latent " + model.name(z) + " has no words below it");
  std::vector<WordJoint> joints;
  joints.reserve(words.size());
  for (int w : words) joints.push_back({model.name(w), pair_marginal(model, z, w)});
  return label_topic(model.name(z), model.variable(z).level, joints, top_k);
}

TopicHierarchy extract_hierarchy(const LatentTreeModel& model, std::size_t top_k,
                                 bool skip_level_1) {
  TopicHierarchy h;
  const int top = model.max_latent_level();
  const int lowest = skip_level_1 && top > 1 ? 2 : 1;
  std::map<int, int> node_of;
  for (int z : model.latents()) {
    if (model.variable(z).level < lowest) continue;
    node_of[z] = static_cast<int>(h.nodes.size());
    h.nodes.push_back({extract_topic(model, z, top_k), {}});
  }
  for (const auto& [z, node] : node_of) {
    const int level = model.variable(z).level;
    if (level == top) {
      h.roots.push_back(node);
      continue;
    }
    for (int u : model.neighbors(z))
      if (model.variable(u).latent() && model.variable(u).level == level + 1) {
        h.nodes[node_of.at(u)].children.push_back(node);
        break;
      }
  }
  return h;
}

Topic narrow_topic(const LatentTreeModel& model, int z, std::size_t top_k,
                   int marginal_updates, const SparseBinaryCorpus& data) {
  Topic topic = extract_topic(model, z, top_k);
  if (marginal_updates > 0 && !topic.words.empty()) {
    LatentTreeModel lcm;
    Cpt prior = Cpt::prior(topic.size);
    clamp_cpt(prior, true);
    const int root = lcm.add_variable({topic.latent, VarKind::kLatent, 1}, -1, prior);
    EmConfig em;
    em.max_iters = marginal_updates;
    em.ll_tolerance = -std::numeric_limits<double>::infinity();
    em.restarts = 1;
    for (const auto& w : topic.words) {
      lcm.add_variable({w.word, VarKind::kObserved, 0}, root, Cpt::conditional(w.p0, w.p1));
      em.frozen.insert(w.word);
    }
    const EmResult fit = batch_em(lcm, CaseData(lcm, data), em);
    topic.size = fit.model.cpt(fit.model.root())(0, 1);
    topic.background_size = 1.0 - topic.size;
  }
  topic.narrow_size = topic.size;
  return topic;
}

// ---------------------------------------------------------------------------

namespace {

ojson node_json(const TopicHierarchy& h, int node) {
  const Topic& t = h.nodes[node].topic;
  ojson j;
  j["latent"] = t.latent;
  j["level"] = t.level;
  j["size"] = t.size;
  if (t.narrow_size) j["narrow_size"] = *t.narrow_size;
  ojson words = ojson::array();
  for (const auto& w : t.words)
    words.push_back({{"word", w.word}, {"p1", w.p1}, {"p0", w.p0}, {"mi", w.mi}});
  j["words"] = std::move(words);
  ojson children = ojson::array();
  for (int c : h.nodes[node].children) children.push_back(node_json(h, c));
  j["children"] = std::move(children);
  return j;
}

int node_from_json(const ojson& j, TopicHierarchy& h) {
  Topic t;
  t.latent = j.at("latent").get<std::string>();
  t.level = j.at("level").get<int>();
  t.size = j.at("size").get<double>();
  t.background_size = 1.0 - t.size;
  if (j.contains("narrow_size")) t.narrow_size = j["narrow_size"].get<double>();
  for (const auto& w : j.at("words"))
    t.words.push_back({w.at("word").get<std::string>(), w.at("p1").get<double>(),
                       w.at("p0").get<double>(), w.at("mi").get<double>()});
  const int node = static_cast<int>(h.nodes.size());
  h.nodes.push_back({std::move(t), {}});
  for (const auto& c : j.at("children")) {
    const int child = node_from_json(c, h);
    h.nodes[node].children.push_back(child);
  }
  return node;
}

std::string label(const Topic& t, std::size_t words) {
  char size[32];
  std::snprintf(size, sizeof size, "[%.2f]", t.size);
  std::string out = size;
  for (std::size_t i = 0; i < std::min(words, t.words.size()); ++i) out += " " + t.words[i].word;
  return out;
}

std::string escape_html(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

void text_node(const TopicHierarchy& h, int node, int depth, std::size_t words,
               std::string& out) {
  out += std::string(2 * depth, ' ') + label(h.nodes[node].topic, words) + "\n";
  for (int c : h.nodes[node].children) text_node(h, c, depth + 1, words, out);
}

void html_node(const TopicHierarchy& h, int node, std::size_t words, std::string& out) {
  const auto& n = h.nodes[node];
  const std::string text = escape_html(label(n.topic, words));
  if (n.children.empty()) {
    out += "<li>" + text + "</li>\n";
    return;
  }
  out += "<li><details open><summary>" + text + "</summary>\n<ul>\n";
  for (int c : n.children) html_node(h, c, words, out);
  out += "</ul>\n</details></li>\n";
}

}  // namespace

std::string hierarchy_json(const TopicHierarchy& hierarchy) {
  ojson roots = ojson::array();
  for (int r : hierarchy.roots) roots.push_back(node_json(hierarchy, r));
  return roots.dump(1) + "\n";
}

TopicHierarchy hierarchy_from_json(const std::string& text) {
  TopicHierarchy h;
  try {
    const ojson roots = ojson::parse(text);
    if (!roots.is_array()) throw DataError("topic file must hold an array");
    for (const auto& r : roots) h.roots.push_back(node_from_json(r, h));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed topic file: ") + e.what());
  }
  return h;
}

std::string hierarchy_text(const TopicHierarchy& hierarchy, std::size_t words) {
  std::string out;
  for (int r : hierarchy.roots) text_node(hierarchy, r, 0, words, out);
  return out;
}

std::string hierarchy_html(const TopicHierarchy& hierarchy, std::size_t words) {
  std::string out =
      "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n"
      "<title>Topic hierarchy</title>\n<style>\n"
      "body { font-family: monospace; }\nul { list-style: none; }\n"
      "summary { cursor: pointer; }\n</style>\n</head>\n<body>\n<ul>\n";
  for (int r : hierarchy.roots) html_node(hierarchy, r, words, out);
  out += "</ul>\n</body>\n</html>\n";
  return out;
}

}  // namespace hlta
