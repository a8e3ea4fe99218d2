#include "deontic/corpus.hpp"

#include <cctype>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "deontic/io.hpp"
#include "deontic/rng.hpp"

namespace deontic::corpus {

namespace {

using text::ClassLabel;

struct DisjointSets {
  std::vector<int> parent;
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
  }
};

std::vector<std::string> split_tokens(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string t; in >> t;) out.push_back(std::move(t));
  return out;
}

// Largest edit distance that still meets the similarity threshold.
std::size_t distance_limit(std::size_t longest, double threshold) {
  return static_cast<std::size_t>(std::floor((1.0 - threshold) * static_cast<double>(longest) + 1e-9));
}

bool similar_enough(const std::string& a, const std::string& b,
                    const std::vector<std::string>* ta, const std::vector<std::string>* tb,
                    double threshold, double* sim_out = nullptr) {
  if (ta != nullptr) {
    const std::size_t longest = std::max(ta->size(), tb->size());
    if (longest == 0) {
      if (sim_out) *sim_out = 1.0;
      return true;
    }
    const auto d = levenshtein_bounded(*ta, *tb, distance_limit(longest, threshold));
    if (!d) return false;
    const double sim = 1.0 - static_cast<double>(*d) / static_cast<double>(longest);
    if (sim_out) *sim_out = sim;
    return sim >= threshold;
  }
  const std::size_t longest = std::max(a.size(), b.size());
  if (longest == 0) {
    if (sim_out) *sim_out = 1.0;
    return true;
  }
  const auto d = levenshtein_bounded(std::string_view(a), std::string_view(b),
                                     distance_limit(longest, threshold));
  if (!d) return false;
  const double sim = 1.0 - static_cast<double>(*d) / static_cast<double>(longest);
  if (sim_out) *sim_out = sim;
  return sim >= threshold;
}

// ---- synthetic contract language ---------------------------------------

const std::vector<std::string> kParties = {
    "The Supplier", "The Customer", "The Provider", "Provider", "The Client", "Client",
    "The Receiving Party", "The Disclosing Party", "Each Party", "The Contractor",
    "The Licensee", "The Licensor", "The Service Provider", "The Buyer", "The Seller",
    "The Consultant", "The Distributor", "The Agent"};

const std::vector<std::string> kObligationModals = {
    "shall", "shall", "will", "must", "is obliged to", "agrees to", "undertakes to",
    "is required to"};

const std::vector<std::string> kProhibitionModals = {
    "shall not", "shall not", "will not", "must not", "may not", "is not entitled to",
    "is not permitted to", "shall in no event"};

const std::vector<std::string> kVerbs = {
    "process", "transfer", "disclose", "use", "keep", "provide", "deliver", "pay", "assign",
    "suspend", "terminate", "modify", "sublicense", "copy", "store", "access", "share",
    "invoice", "maintain", "retain", "destroy", "return", "submit", "publish", "sell",
    "license", "subcontract", "remove", "install", "inspect", "replace", "supply"};

const std::vector<std::string> kObjects = {
    "the Personal Data", "any Confidential Information", "the Services", "the Deliverables",
    "all invoices", "the Equipment", "this Agreement", "the Software", "the Customer Data",
    "the Fees", "the Documentation", "the Premises", "the Source Code", "the Reports",
    "the Results", "any Materials", "the Goods", "the Licensed Products", "the Approved Requirements",
    "the Work Product", "the Hardware", "any Intellectual Property", "the Records", "the Samples"};

const std::vector<std::string> kTails = {
    "in accordance with the terms of this Agreement",
    "for the duration of this Agreement",
    "at its own cost and expense",
    "to any person other than in accordance with Clause 13.3",
    "as soon as reasonably practicable",
    "during the Term",
    "in a timely and professional manner",
    "other than for the purposes of this Agreement",
    "at the request of the Customer",
    "unless otherwise agreed in writing",
    "in connection with the provision of the Services",
    "to any third parties",
    "within thirty days of receipt",
    "prior to the lapse of the fifth year",
    "without undue delay",
    "in compliance with all applicable laws",
    "in accordance with Client's written instructions",
    "without the prior written consent of the Customer",
    "to the extent permitted by law",
    "on the terms set out in Schedule 2"};

const std::vector<std::string> kLeads = {
    "Subject to Clause 4.2,", "Notwithstanding the foregoing,", "Except as expressly provided herein,",
    "During the Term,", "Upon termination of this Agreement,", "Where applicable,", "In addition,",
    "Following the Effective Date,", "At all times,", "For the avoidance of doubt,"};

const std::vector<std::string> kLongLeads = {
    "Save as set out in the Service Level Agreement and the Data Processing Annex,",
    "With effect from the date on which the Parties sign the relevant Order Form,",
    "In order to ensure the continuity and quality of the Services provided hereunder,",
    "Without prejudice to any other rights or remedies available under this Agreement,",
    "Having regard to the security requirements described in the Technical Schedule,"};

const std::vector<std::string> kAsides = {
    "acting reasonably and in good faith", "at all times during the Term",
    "together with its Affiliates and subcontractors", "as the case may be",
    "in its capacity as data processor", "save where required by law"};

const std::vector<std::string> kNoneSubjects = {
    "This Agreement", "The Schedule", "The Order Form", "The Statement of Work", "Clause 7",
    "The Effective Date", "The Term", "The Fee Schedule", "The Service Description", "Annex B",
    "The Price List", "The Project Plan"};

const std::vector<std::string> kNonePredicates = {
    "is governed by the laws of England and Wales",
    "forms an integral part of the contractual documentation",
    "sets out the commercial terms agreed between the Parties",
    "constitutes the entire agreement between the Parties",
    "survives the termination or expiry of this Agreement",
    "describes the scope of the Services in further detail",
    "was amended on the date of the last signature",
    "is attached as an appendix to this document",
    "contains the definitions used throughout the contract",
    "replaces all prior arrangements relating to its subject matter",
    "has been prepared in the English language",
    "applies to all orders placed after the Effective Date"};

const std::vector<std::string> kNoneFixed = {
    "Details shall be determined in the individual contracts.",
    "Nothing in this section will restrict either Party's right to recruit.",
    "The headings in this Agreement are for convenience only.",
    "Words in the singular include the plural and vice versa.",
    "Any reference to a statute includes that statute as amended.",
    "The Parties have agreed the following terms in good faith."};

const std::vector<std::string> kStaff = {"Provider staff", "Supplier personnel", "employee of the Contractor",
                                         "Party", "Subcontractor", "member of the Consultant's team"};

const std::vector<std::string> kCompetitors = {
    "to any Customer Competitor", "to any third party", "on behalf of any competitor",
    "without the written approval of the Client", "outside the Territory"};

// Up to three qualifying tails, so the modal often sits mid-sentence.
std::string pick_vp(Rng& rng, bool allow_tail) {
  std::string vp = rng.pick(kVerbs) + " " + rng.pick(kObjects);
  if (!allow_tail || rng.bernoulli(0.2)) return vp;
  const int tails = 1 + static_cast<int>(rng.below(3));
  for (int i = 0; i < tails; ++i) vp += (i == 0 ? " " : (i == tails - 1 ? " and " : ", ")) + rng.pick(kTails);
  return vp;
}

// An optional lead-in phrase, sometimes two, and an optional aside after
// the party; "The" after a lead drops to lower case.
std::string with_lead(Rng& rng, std::string party) {
  if (rng.bernoulli(0.3)) party += ", " + rng.pick(kAsides) + ",";
  if (!rng.bernoulli(0.5)) return party;
  if (party.starts_with("The ")) party[0] = 't';
  std::string lead = rng.pick(kLeads);
  if (rng.bernoulli(0.4)) lead = rng.pick(kLongLeads) + " " + lead;
  return lead + " " + party;
}

std::string obligation_sentence(Rng& rng) {
  return with_lead(rng, rng.pick(kParties)) + " " + rng.pick(kObligationModals) + " " + pick_vp(rng, true) + ".";
}

std::string prohibition_sentence(Rng& rng) {
  if (rng.bernoulli(0.2))
    return "No " + rng.pick(kStaff) + " " + (rng.bernoulli(0.5) ? "will" : "shall") + " " +
           rng.pick(kVerbs) + " " + rng.pick(kObjects) + " " + rng.pick(kCompetitors) + ".";
  return with_lead(rng, rng.pick(kParties)) + " " + rng.pick(kProhibitionModals) + " " + pick_vp(rng, true) + ".";
}

std::string none_sentence(Rng& rng) {
  if (rng.bernoulli(0.25)) return rng.pick(kNoneFixed);
  return rng.pick(kNoneSubjects) + " " + rng.pick(kNonePredicates) + ".";
}

std::string marker(int style, int index) {
  static const std::vector<std::string> roman = {"i", "ii", "iii", "iv", "v", "vi", "vii", "viii"};
  switch (style) {
    case 0: return "(" + std::string(1, static_cast<char>('a' + index)) + ")";
    case 1: return "(" + roman[static_cast<std::size_t>(index)] + ")";
    default: return "(" + std::to_string(index + 1) + ")";
  }
}

struct PlannedSentence {
  std::string text;
  ClassLabel label;
  bool intro_dependent = false;
  bool list_item = false;
};

std::vector<PlannedSentence> clause_list(Rng& rng, double prohibition_rate) {
  std::vector<PlannedSentence> out;
  const bool prohibitive = rng.bernoulli(prohibition_rate);
  const int items = 2 + static_cast<int>(rng.below(4));
  const int style = static_cast<int>(rng.below(3));
  const std::string party = rng.pick(kParties);
  if (prohibitive) {
    if (rng.bernoulli(0.25)) {
      out.push_back({party + " shall not directly solicit the employment of:",
                     ClassLabel::ObligationListIntro});
    } else {
      const std::vector<std::string> forms = {"shall not:", "will not:", "must not:",
                                              "shall not, without prior consent:"};
      out.push_back({party + " " + rng.pick(forms), ClassLabel::ObligationListIntro});
    }
  } else {
    const std::vector<std::string> forms = {"shall:", "will:", "must:", "agrees to:",
                                            "undertakes to:", "shall, at its own cost:"};
    out.push_back({party + " " + rng.pick(forms), ClassLabel::ObligationListIntro});
  }
  const bool nominal = prohibitive && out.front().text.ends_with("employment of:");
  for (int k = 0; k < items; ++k) {
    const bool last = k == items - 1;
    std::string sep = last ? "." : (k == items - 2 && rng.bernoulli(0.5) ? "; and" : ";");
    std::string body;
    ClassLabel label;
    bool dependent = false;
    if (nominal) {
      body = "in the case of " + rng.pick(kParties) + ", its employees engaged in " +
             rng.pick(kObjects);
      label = ClassLabel::ProhibitionListItem;
      dependent = true;
    } else if (prohibitive) {
      body = pick_vp(rng, true);
      label = ClassLabel::ProhibitionListItem;
      dependent = true;
    } else if (rng.bernoulli(0.25)) {
      body = "not " + pick_vp(rng, true);
      label = ClassLabel::ProhibitionListItem;
    } else {
      body = (rng.bernoulli(0.15) ? "only " : "") + pick_vp(rng, true);
      label = ClassLabel::ObligationListItem;
    }
    out.push_back({marker(style, k) + " " + body + sep, label, dependent, true});
  }
  return out;
}

PlannedSentence plain_sentence(Rng& rng) {
  const double r = rng.uniform();
  if (r < 0.50) return {none_sentence(rng), ClassLabel::None};
  if (r < 0.85) return {obligation_sentence(rng), ClassLabel::Obligation};
  return {prohibition_sentence(rng), ClassLabel::Prohibition};
}

// Letters substituted in place keep token boundaries intact.
std::string perturb(const std::string& s, std::size_t edits, Rng& rng) {
  std::string out = s;
  std::vector<std::size_t> letters;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (std::islower(static_cast<unsigned char>(out[i]))) letters.push_back(i);
  for (std::size_t e = 0; e < edits && !letters.empty(); ++e) {
    const std::size_t pos = letters[static_cast<std::size_t>(rng.below(letters.size()))];
    char c;
    do {
      c = static_cast<char>('a' + rng.below(26));
    } while (c == out[pos]);
    out[pos] = c;
  }
  return out;
}

nlohmann::json sentence_json(const text::Sentence& s) {
  nlohmann::json tokens = nlohmann::json::array();
  for (const auto& t : s.tokens)
    tokens.push_back({{"w", t.surface}, {"pos", t.pos}, {"shape", text::shape_name(t.shape)}});
  nlohmann::json j = {{"text", s.text}, {"tokens", std::move(tokens)}};
  if (s.gold) j["label"] = text::label_name(*s.gold);
  j["span"] = {s.span.begin, s.span.end};
  if (s.truncated) j["truncated"] = true;
  return j;
}

[[noreturn]] void fail(const std::string& source, std::size_t line, const std::string& msg) {
  throw ParseError((source.empty() ? std::string("<corpus>") : source) + ":" + std::to_string(line) +
                   ": " + msg);
}

const nlohmann::json& require(const nlohmann::json& obj, const char* field, const std::string& source,
                              std::size_t line) {
  if (!obj.is_object() || !obj.contains(field)) fail(source, line, std::string("missing field '") + field + "'");
  return obj.at(field);
}

text::Sentence sentence_from(const nlohmann::json& j, const std::string& source, std::size_t line) {
  const std::string txt = require(j, "text", source, line).get<std::string>();
  std::optional<ClassLabel> gold;
  if (j.contains("label") && !j.at("label").is_null()) {
    gold = text::parse_label(j.at("label").get<std::string>());
    if (!gold) fail(source, line, "unknown label '" + j.at("label").get<std::string>() + "'");
  }
  text::CharSpan span;
  if (j.contains("span")) {
    span.begin = j.at("span").at(0).get<std::size_t>();
    span.end = j.at("span").at(1).get<std::size_t>();
  }
  if (!j.contains("tokens")) {
    text::Sentence s = text::make_sentence(txt, gold, span);
    if (s.tokens.empty()) fail(source, line, "sentence without tokens");
    return s;
  }
  text::Sentence s;
  s.text = txt;
  s.gold = gold;
  s.span = span;
  s.truncated = j.value("truncated", false);
  std::vector<std::string> surfaces, tags;
  bool have_tags = true;
  for (const auto& t : j.at("tokens")) {
    const std::string w = require(t, "w", source, line).get<std::string>();
    if (w.empty()) fail(source, line, "empty token surface");
    surfaces.push_back(w);
    if (t.contains("pos")) {
      const std::string pos = t.at("pos").get<std::string>();
      if (text::pos_index(pos) < 0) fail(source, line, "unknown POS tag '" + pos + "'");
      tags.push_back(pos);
    } else {
      have_tags = false;
    }
    if (t.contains("shape")) {
      const auto shape = text::parse_shape(t.at("shape").get<std::string>());
      if (!shape || *shape != text::compute_shape(w))
        fail(source, line, "shape of token '" + w + "' does not match its surface");
    }
  }
  if (surfaces.empty()) fail(source, line, "sentence without tokens");
  if (surfaces.size() > text::kMaxSentenceTokens) {
    surfaces.resize(text::kMaxSentenceTokens);
    if (have_tags) tags.resize(text::kMaxSentenceTokens);
    s.truncated = true;
  }
  s.tokens = text::make_tokens(surfaces, have_tags ? tags : std::vector<std::string>{});
  return s;
}

}  // namespace

std::size_t Corpus::sentence_count() const {
  std::size_t n = 0;
  for (const auto& s : sections) n += s.sentences.size();
  return n;
}

std::size_t levenshtein(std::string_view a, std::string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  const std::size_t m = b.size();
  if (m == 0) return a.size();
  std::vector<std::size_t> row(m + 1);
  for (std::size_t j = 0; j <= m; ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({diag + (a[i - 1] == b[j - 1] ? 0 : 1), up + 1, row[j - 1] + 1});
      diag = up;
    }
  }
  return row[m];
}

double similarity(std::string_view a, std::string_view b) {
  const std::size_t longest = std::max(a.size(), b.size());
  if (longest == 0) return 1.0;
  return 1.0 - static_cast<double>(levenshtein(a, b)) / static_cast<double>(longest);
}

ClusterTable cluster_texts(const std::vector<std::string>& texts, double threshold,
                           DistanceLevel level) {
  if (!(threshold > 0.0 && threshold <= 1.0))
    throw std::invalid_argument("similarity threshold must be in (0, 1]");
  const std::size_t n = texts.size();
  std::vector<std::vector<std::string>> tokens;
  if (level == DistanceLevel::Token)
    for (const auto& t : texts) tokens.push_back(split_tokens(t));
  DisjointSets sets(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      // Pairs already connected cannot change the components.
      if (sets.find(static_cast<int>(i)) == sets.find(static_cast<int>(j))) continue;
      const bool linked = level == DistanceLevel::Token
                              ? similar_enough(texts[i], texts[j], &tokens[i], &tokens[j], threshold)
                              : similar_enough(texts[i], texts[j], nullptr, nullptr, threshold);
      if (linked) sets.unite(static_cast<int>(i), static_cast<int>(j));
    }
  }
  ClusterTable table;
  table.cluster_of.assign(n, -1);
  std::vector<int> root_to_cluster(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    const int root = sets.find(static_cast<int>(i));
    int& id = root_to_cluster[static_cast<std::size_t>(root)];
    if (id < 0) {
      id = static_cast<int>(table.clusters.size());
      table.clusters.emplace_back();
    }
    table.clusters[static_cast<std::size_t>(id)].push_back(static_cast<int>(i));
    table.cluster_of[i] = id;
  }
  return table;
}

ClusterTable cluster_sections(const std::vector<text::Section>& sections, double threshold,
                              DistanceLevel level) {
  std::vector<std::string> texts;
  for (const auto& s : sections) texts.push_back(s.joined_text());
  return cluster_texts(texts, threshold, level);
}

std::string_view split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Dev: return "dev";
    case Split::Test: return "test";
  }
  return "?";
}

SplitAssignment assign_splits(const ClusterTable& clusters, const std::vector<std::size_t>& weights,
                              std::array<double, 3> ratios, std::uint64_t seed) {
  const double total_ratio = ratios[0] + ratios[1] + ratios[2];
  if (ratios[0] <= 0 || ratios[1] <= 0 || ratios[2] <= 0 || std::abs(total_ratio - 1.0) > 1e-6)
    throw std::invalid_argument("split ratios must be positive and sum to 1");
  if (weights.size() != clusters.cluster_of.size())
    throw std::invalid_argument("one weight per section is required");
  SplitAssignment out;
  out.clusters = clusters;
  out.of_section.assign(weights.size(), Split::Train);
  std::vector<int> order(clusters.clusters.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  std::array<double, 3> filled{0, 0, 0};
  double total = 0;
  for (auto w : weights) total += static_cast<double>(w);
  for (int c : order) {
    const auto& members = clusters.clusters[static_cast<std::size_t>(c)];
    double weight = 0;
    for (int m : members) weight += static_cast<double>(weights[static_cast<std::size_t>(m)]);
    int best = 0;
    double best_fill = std::numeric_limits<double>::infinity();
    for (int s = 0; s < 3; ++s) {
      const double fill = filled[static_cast<std::size_t>(s)] / (ratios[static_cast<std::size_t>(s)] * total);
      if (fill < best_fill) {
        best_fill = fill;
        best = s;
      }
    }
    filled[static_cast<std::size_t>(best)] += weight;
    for (int m : members) out.of_section[static_cast<std::size_t>(m)] = static_cast<Split>(best);
  }
  for (int s = 0; s < 3; ++s) {
    if (filled[static_cast<std::size_t>(s)] == 0 && total > 0)
      out.warnings.push_back(std::string(split_name(static_cast<Split>(s))) +
                             " split is empty: clusters are too large to honour the ratios");
  }
  if (clusters.clusters.size() == 1 && weights.size() > 1)
    out.warnings.push_back("all sections form a single cluster; the corpus cannot be split");
  return out;
}

std::vector<LeakPair> find_leaks(const std::vector<std::string>& texts,
                                 const std::vector<Split>& assignment, double threshold,
                                 DistanceLevel level) {
  std::vector<LeakPair> leaks;
  std::vector<std::vector<std::string>> tokens;
  if (level == DistanceLevel::Token)
    for (const auto& t : texts) tokens.push_back(split_tokens(t));
  for (std::size_t i = 0; i < texts.size(); ++i) {
    for (std::size_t j = i + 1; j < texts.size(); ++j) {
      if (assignment[i] == assignment[j]) continue;
      double sim = 0;
      const bool close = level == DistanceLevel::Token
                             ? similar_enough(texts[i], texts[j], &tokens[i], &tokens[j], threshold, &sim)
                             : similar_enough(texts[i], texts[j], nullptr, nullptr, threshold, &sim);
      if (close) leaks.push_back({static_cast<int>(i), static_cast<int>(j), sim});
    }
  }
  return leaks;
}

Corpus generate_synthetic(std::size_t n_sections, std::uint64_t seed, const SynthOptions& options,
                          SynthStats* stats) {
  if (n_sections == 0) throw std::invalid_argument("generate_synthetic needs at least one section");
  Rng rng(seed);
  Corpus corpus;
  corpus.source = "synthetic";
  corpus.seed = seed;
  SynthStats local;
  const int cap = std::clamp(options.max_sentences, 1, static_cast<int>(text::kMaxSectionSentences));
  for (std::size_t k = 0; k < n_sections; ++k) {
    std::vector<PlannedSentence> plan;
    const int target = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(std::min(cap, 10))));
    const bool with_list = cap >= 3 && rng.bernoulli(0.55);
    std::vector<PlannedSentence> list;
    if (with_list) list = clause_list(rng, options.prohibition_list_rate);
    const int plain = std::max(0, std::min(target, cap - static_cast<int>(list.size())) -
                                      (with_list ? 1 : 0));
    const int before = plain == 0 ? 0 : static_cast<int>(rng.below(static_cast<std::uint64_t>(plain) + 1));
    for (int i = 0; i < before; ++i) plan.push_back(plain_sentence(rng));
    for (auto& p : list) plan.push_back(std::move(p));
    for (int i = before; i < plain; ++i) plan.push_back(plain_sentence(rng));
    if (plan.empty()) plan.push_back(plain_sentence(rng));
    if (static_cast<int>(plan.size()) > cap) plan.resize(static_cast<std::size_t>(cap));

    text::Section section;
    section.doc_id = "synth-" + std::to_string(seed) + "-" + std::to_string(k / 10);
    section.section_id = "s" + std::to_string(k);
    std::size_t offset = 0;
    for (auto& p : plan) {
      const text::CharSpan span{offset, offset + p.text.size()};
      offset = span.end + 1;
      section.sentences.push_back(text::make_sentence(p.text, p.label, span));
      ++local.label_counts[static_cast<std::size_t>(text::label_index(p.label))];
      if (p.list_item) ++local.list_items;
      if (p.intro_dependent) ++local.intro_dependent_items;
    }
    corpus.sections.push_back(std::move(section));
  }
  if (stats != nullptr) *stats = local;
  return corpus;
}

std::vector<std::pair<int, int>> inject_near_duplicates(Corpus& corpus, std::size_t count,
                                                        double min_similarity, std::uint64_t seed) {
  if (corpus.sections.empty()) throw std::invalid_argument("cannot duplicate from an empty corpus");
  Rng rng(seed);
  std::vector<std::pair<int, int>> pairs;
  const std::size_t originals = corpus.sections.size();
  for (std::size_t k = 0; k < count; ++k) {
    const int src = static_cast<int>(rng.below(originals));
    text::Section copy = corpus.sections[static_cast<std::size_t>(src)];
    const std::size_t length = copy.joined_text().size();
    // Substitutions bound the distance by the edit count.
    const auto budget = static_cast<std::size_t>(std::floor((1.0 - min_similarity) * static_cast<double>(length)));
    const std::size_t edits = std::max<std::size_t>(1, budget / 2);
    std::size_t remaining = std::min(edits, budget);
    for (auto& s : copy.sentences) {
      if (remaining == 0) break;
      const std::size_t here = std::min<std::size_t>(remaining, 1 + rng.below(remaining));
      std::string changed = perturb(s.text, here, rng);
      s = text::make_sentence(std::move(changed), s.gold, s.span);
      remaining -= here;
    }
    copy.section_id += "-dup" + std::to_string(k);
    corpus.sections.push_back(std::move(copy));
    pairs.emplace_back(src, static_cast<int>(corpus.sections.size()) - 1);
  }
  return pairs;
}

bool is_modal_or_negation(std::string_view token) {
  static const std::vector<std::string> words = {"shall", "will", "must", "may", "can", "cannot",
                                                 "should", "would", "not", "no", "never", "nor"};
  std::string low(token);
  for (char& c : low) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return std::find(words.begin(), words.end(), low) != words.end();
}

std::string corpus_jsonl(const Corpus& corpus) {
  std::string out;
  if (!corpus.source.empty() || corpus.seed) {
    nlohmann::json meta = {{"source", corpus.source}};
    if (corpus.seed) meta["seed"] = *corpus.seed;
    out += nlohmann::json{{"_meta", meta}}.dump() + "\n";
  }
  for (const auto& sec : corpus.sections) {
    nlohmann::json sentences = nlohmann::json::array();
    for (const auto& s : sec.sentences) sentences.push_back(sentence_json(s));
    nlohmann::json line = {{"doc_id", sec.doc_id}, {"section_id", sec.section_id},
                           {"sentences", std::move(sentences)}};
    out += line.dump() + "\n";
  }
  return out;
}

Corpus parse_corpus(std::string_view jsonl, const std::string& source) {
  Corpus corpus;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  std::vector<std::pair<std::string, std::string>> seen;
  while (pos < jsonl.size()) {
    std::size_t end = jsonl.find('\n', pos);
    if (end == std::string_view::npos) end = jsonl.size();
    std::string_view line = jsonl.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      fail(source, line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) fail(source, line_no, "expected a JSON object");
    try {
      if (j.contains("_meta")) {
        const auto& meta = j.at("_meta");
        corpus.source = meta.value("source", std::string());
        if (meta.contains("seed")) corpus.seed = meta.at("seed").get<std::uint64_t>();
        continue;
      }
      text::Section sec;
      sec.doc_id = require(j, "doc_id", source, line_no).get<std::string>();
      sec.section_id = require(j, "section_id", source, line_no).get<std::string>();
      if (j.contains("sentences")) {
        for (const auto& s : j.at("sentences")) sec.sentences.push_back(sentence_from(s, source, line_no));
        if (sec.sentences.empty()) fail(source, line_no, "section without sentences");
        corpus.sections.push_back(std::move(sec));
      } else if (j.contains("text")) {
        std::vector<ClassLabel> labels;
        if (j.contains("labels")) {
          for (const auto& l : j.at("labels")) {
            auto parsed = text::parse_label(l.get<std::string>());
            if (!parsed) fail(source, line_no, "unknown label '" + l.get<std::string>() + "'");
            labels.push_back(*parsed);
          }
        }
        for (auto& chunk : text::assemble_section(sec.doc_id, sec.section_id,
                                                  j.at("text").get<std::string>(), labels))
          corpus.sections.push_back(std::move(chunk));
      } else {
        fail(source, line_no, "missing field 'sentences'");
      }
    } catch (const nlohmann::json::exception& e) {
      fail(source, line_no, std::string("malformed field: ") + e.what());
    } catch (const text::AlignmentError& e) {
      fail(source, line_no, e.what());
    }
  }
  for (std::size_t i = 0; i < corpus.sections.size(); ++i) {
    for (std::size_t k = 0; k < i; ++k) {
      if (corpus.sections[k].doc_id == corpus.sections[i].doc_id &&
          corpus.sections[k].section_id == corpus.sections[i].section_id)
        throw ParseError("duplicate section " + corpus.sections[i].doc_id + "/" +
                         corpus.sections[i].section_id);
    }
  }
  if (corpus.source.empty()) corpus.source = source;
  return corpus;
}

Corpus read_corpus(const std::filesystem::path& path) {
  return parse_corpus(io::read_file(path), path.string());
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  io::write_file_atomic(path, corpus_jsonl(corpus));
}

Corpus select_split(const Corpus& corpus, const std::vector<Split>& assignment, Split which) {
  Corpus out;
  out.source = corpus.source;
  out.seed = corpus.seed;
  for (std::size_t i = 0; i < corpus.sections.size(); ++i)
    if (assignment[i] == which) out.sections.push_back(corpus.sections[i]);
  return out;
}

}  // namespace deontic::corpus
