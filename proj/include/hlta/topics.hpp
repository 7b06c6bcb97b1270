#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "hlta/corpus.hpp"
#include "hlta/model.hpp"

namespace hlta {

struct TopicWord {
  std::string word;
  double p1 = 0.0;  // P(word = 1 | s1)
  double p0 = 0.0;  // P(word = 1 | s0)
  double mi = 0.0;  // I(word; Z)
};

/// The document cluster Z = s1 of a latent. s0 is the background cluster.
struct Topic {
  std::string latent;
  int level = 0;
  double size = 0.0;             // P(Z = s1)
  double background_size = 0.0;  // P(Z = s0)
  std::vector<TopicWord> words;  // MI descending
  std::optional<double> narrow_size;
};

/// Joint P(Z, word) of a latent and one word, flattened as [2*z + w] in the
/// model's state labels.
struct WordJoint {
  std::string word;
  std::array<double, 4> joint;
};

inline constexpr std::size_t kBackgroundWords = 3;
inline constexpr std::size_t kDisplayWords = 7;

/// Orders words by MI with Z (ties keep input order), names the state whose
/// top-3 occurrence probabilities sum lower s0, and keeps the first top_k
/// words (0 keeps all). Joints must share the same P(Z).
Topic label_topic(const std::string& latent, int level, const std::vector<WordJoint>& joints,
                  std::size_t top_k);

/// Topic of latent z over the observed variables of its subtree.
/// Throws InvariantError when the subtree has no observed variable.
Topic extract_topic(const LatentTreeModel& model, int z, std::size_t top_k);

struct TopicHierarchy {
  struct Node {
    Topic topic;
    std::vector<int> children;  // node indices
  };
  std::vector<Node> nodes;
  std::vector<int> roots;  // one per top-level latent
};

/// One topic per latent, linked parent to child along the model's levels.
/// With skip_level_1 the level-1 topics are left out unless they form the
/// top level.
TopicHierarchy extract_hierarchy(const LatentTreeModel& model, std::size_t top_k,
                                 bool skip_level_1);

/// Size of the cluster of documents that contain the topic's word pattern:
/// an LCM over the top_k words of z takes its tables from the model, and
/// only P(Z) is refitted on `data` for `marginal_updates` EM iterations.
/// The returned topic has size == narrow_size.
Topic narrow_topic(const LatentTreeModel& model, int z, std::size_t top_k,
                   int marginal_updates, const SparseBinaryCorpus& data);

/// Nested {latent, level, size, [narrow_size,] words: [{word, p1, p0, mi}],
/// children} objects, one array entry per root.
std::string hierarchy_json(const TopicHierarchy& hierarchy);
TopicHierarchy hierarchy_from_json(const std::string& text);

/// Indented "[0.05] space nasa orbit" lines, one per topic.
std::string hierarchy_text(const TopicHierarchy& hierarchy,
                           std::size_t words = kDisplayWords);
/// Standalone page with the same lines as collapsible nodes.
std::string hierarchy_html(const TopicHierarchy& hierarchy,
                           std::size_t words = kDisplayWords);

}  // namespace hlta
