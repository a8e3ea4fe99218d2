#include "deontic/text.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <unordered_map>
#include <unordered_set>

namespace deontic::text {

namespace {

constexpr std::array<std::string_view, kNumClasses> kLabelNames = {
    "None", "Obligation", "Prohibition", "ObligationListIntro", "ObligationListItem",
    "ProhibitionListItem"};
constexpr std::array<std::string_view, kNumClasses> kLabelTitles = {
    "None", "Obligation", "Prohibition", "Obl. List Begin", "Obl. List Item", "Proh. List Item"};
constexpr std::array<std::string_view, kNumShapes> kShapeNames = {
    "ALL_CAPS", "INIT_CAP", "ALL_LOWER", "ALL_DIGITS", "MIXED_ALNUM", "PUNCT", "LIST_MARKER",
    "OTHER"};

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_upper(char c) { return c >= 'A' && c <= 'Z'; }
bool is_lower(char c) { return c >= 'a' && c <= 'z'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alpha(char c) { return is_upper(c) || is_lower(c); }
bool is_ascii_punct(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u < 128 && std::ispunct(u) != 0;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// Enumeration markers that open a list item: "(a)", "(iv)", "(12)", "a)", "3)".
const std::regex& marker_regex() {
  static const std::regex re(R"(^(\((?:[a-z]{1,2}|[ivxlc]{1,6}|[0-9]{1,3}|[A-Z])\)|(?:[a-z]|[ivx]{1,4}|[0-9]{1,3})\)))");
  return re;
}

// Length of a list marker starting at `pos` and followed by whitespace, or 0.
std::size_t marker_at(std::string_view text, std::size_t pos) {
  const std::size_t limit = std::min<std::size_t>(text.size() - pos, 10);
  const std::string window(text.substr(pos, limit));
  std::smatch m;
  if (!std::regex_search(window, m, marker_regex())) return 0;
  const std::size_t len = static_cast<std::size_t>(m.length(0));
  if (pos + len < text.size() && !is_space(text[pos + len])) return 0;
  return len;
}

// True when the text before `pos` (ignoring whitespace) ends a list slot:
// ":" ";" "," optionally followed by "and" / "or".
bool opens_item(std::string_view text, std::size_t begin, std::size_t pos) {
  std::size_t i = pos;
  while (i > begin && is_space(text[i - 1])) --i;
  if (i == begin) return false;
  auto ends_with_word = [&](std::string_view w) {
    if (i - begin < w.size()) return false;
    if (text.substr(i - w.size(), w.size()) != w) return false;
    return i - w.size() == begin || !is_alpha(text[i - w.size() - 1]);
  };
  for (std::string_view conj : {"and", "or"}) {
    if (ends_with_word(conj)) {
      std::size_t j = i - conj.size();
      while (j > begin && is_space(text[j - 1])) --j;
      return j > begin && (text[j - 1] == ';' || text[j - 1] == ',');
    }
  }
  const char c = text[i - 1];
  return c == ':' || c == ';' || c == ',';
}

const std::unordered_set<std::string>& abbreviations() {
  static const std::unordered_set<std::string> set = {
      "e.g", "i.e", "etc", "no", "nos", "mr", "mrs", "ms", "dr", "inc", "ltd", "co", "corp",
      "art", "arts", "para", "sec", "cl", "vs", "u.s", "u.k", "a.m", "p.m", "approx", "incl",
      "ref", "st", "fig", "cf", "pp", "vol", "viz", "resp", "sch"};
  return set;
}

// Whether the terminal punctuation at `pos` ends a sentence.
bool is_boundary(std::string_view text, std::size_t sentence_begin, std::size_t pos) {
  const char c = text[pos];
  if (c != '.' && c != '!' && c != '?') return false;
  std::size_t next = pos + 1;
  while (next < text.size() && (text[next] == '"' || text[next] == '\'' || text[next] == ')'))
    ++next;
  if (next < text.size() && !is_space(text[next])) return false;
  std::size_t after = next;
  while (after < text.size() && is_space(text[after])) ++after;
  if (after == text.size()) return true;
  if (is_lower(text[after])) return false;
  if (c != '.') return true;
  std::size_t word_begin = pos;
  while (word_begin > sentence_begin && !is_space(text[word_begin - 1])) --word_begin;
  const std::string_view word = text.substr(word_begin, pos - word_begin);
  std::string_view bare = word;
  while (!bare.empty() && (bare.front() == '(' || bare.front() == '"')) bare.remove_prefix(1);
  if (bare.size() == 1 && is_alpha(bare[0])) return false;  // initials
  if (abbreviations().count(lower(bare)) != 0) return false;
  // Leading section numbers such as "1." or "12.3."
  if (word_begin == sentence_begin && !bare.empty() &&
      std::all_of(bare.begin(), bare.end(), [](char ch) { return is_digit(ch) || ch == '.'; }))
    return false;
  return true;
}

std::size_t skip_space(std::string_view text, std::size_t i) {
  while (i < text.size() && is_space(text[i])) ++i;
  return i;
}

std::size_t trim_end(std::string_view text, std::size_t begin, std::size_t end) {
  while (end > begin && is_space(text[end - 1])) --end;
  return end;
}

void push_segment(std::vector<Segment>& out, std::string_view text, std::size_t begin,
                  std::size_t end) {
  begin = skip_space(text, begin);
  end = trim_end(text, begin, end);
  if (end > begin) out.push_back(Segment{std::string(text.substr(begin, end - begin)), {begin, end}});
}

void split_clause_list(std::string_view text, std::size_t begin, std::size_t end,
                       std::vector<Segment>& out) {
  std::size_t colon = std::string_view::npos;
  std::vector<std::size_t> cuts;
  for (std::size_t i = begin; i < end; ++i) {
    if (text[i] == ':' && colon == std::string_view::npos) {
      const std::size_t j = skip_space(text, i + 1);
      if (j < end && j > i + 1 && marker_at(text, j) > 0) colon = i;
      continue;
    }
    if (colon == std::string_view::npos || i <= colon) continue;
    if (i > begin && !is_space(text[i - 1])) continue;
    if (marker_at(text, i) > 0 && opens_item(text, begin, i)) cuts.push_back(i);
  }
  std::size_t start = begin;
  for (std::size_t cut : cuts) {
    push_segment(out, text, start, cut);
    start = cut;
  }
  push_segment(out, text, start, end);
}

const std::unordered_map<std::string, std::string>& lexicon() {
  static const std::unordered_map<std::string, std::string> lex = {
      // modals
      {"shall", "MD"}, {"will", "MD"}, {"must", "MD"}, {"may", "MD"}, {"might", "MD"},
      {"can", "MD"}, {"could", "MD"}, {"should", "MD"}, {"would", "MD"}, {"cannot", "MD"},
      // negation and adverbs
      {"not", "RB"}, {"never", "RB"}, {"n't", "RB"}, {"only", "RB"}, {"also", "RB"},
      {"promptly", "RB"}, {"directly", "RB"}, {"otherwise", "RB"}, {"prior", "RB"},
      {"hereby", "RB"}, {"immediately", "RB"}, {"either", "DT"}, {"neither", "DT"},
      // determiners
      {"the", "DT"}, {"a", "DT"}, {"an", "DT"}, {"any", "DT"}, {"all", "DT"}, {"each", "DT"},
      {"every", "DT"}, {"no", "DT"}, {"this", "DT"}, {"that", "IN"}, {"these", "DT"},
      {"those", "DT"}, {"such", "JJ"}, {"other", "JJ"}, {"some", "DT"}, {"both", "DT"},
      // prepositions and subordinators
      {"of", "IN"}, {"in", "IN"}, {"to", "TO"}, {"for", "IN"}, {"with", "IN"}, {"by", "IN"},
      {"on", "IN"}, {"at", "IN"}, {"from", "IN"}, {"under", "IN"}, {"within", "IN"},
      {"without", "IN"}, {"upon", "IN"}, {"into", "IN"}, {"than", "IN"}, {"after", "IN"},
      {"before", "IN"}, {"during", "IN"}, {"unless", "IN"}, {"if", "IN"}, {"until", "IN"},
      {"as", "IN"}, {"per", "IN"}, {"between", "IN"}, {"against", "IN"}, {"about", "IN"},
      {"pursuant", "JJ"}, {"accordance", "NN"}, {"whether", "IN"}, {"because", "IN"},
      // conjunctions
      {"and", "CC"}, {"or", "CC"}, {"but", "CC"}, {"nor", "CC"},
      // pronouns
      {"it", "PRP"}, {"its", "PRP$"}, {"they", "PRP"}, {"their", "PRP$"}, {"them", "PRP"},
      {"he", "PRP"}, {"she", "PRP"}, {"his", "PRP$"}, {"her", "PRP$"}, {"we", "PRP"},
      {"our", "PRP$"}, {"you", "PRP"}, {"your", "PRP$"}, {"itself", "PRP"},
      {"which", "WDT"}, {"who", "WP"}, {"whom", "WP"}, {"whose", "WP$"}, {"where", "WRB"},
      {"when", "WRB"}, {"there", "EX"},
      // verbs
      {"is", "VBZ"}, {"are", "VBP"}, {"was", "VBD"}, {"were", "VBD"}, {"be", "VB"},
      {"been", "VBN"}, {"being", "VBG"}, {"has", "VBZ"}, {"have", "VBP"}, {"had", "VBD"},
      {"do", "VBP"}, {"does", "VBZ"}, {"did", "VBD"}, {"obliged", "VBN"},
      {"entitled", "VBN"}, {"required", "VBN"}, {"permitted", "VBN"}, {"prohibited", "VBN"},
      {"agrees", "VBZ"}, {"undertakes", "VBZ"}, {"determined", "VBN"}, {"restrict", "VB"},
      {"keep", "VB"}, {"use", "VB"}, {"provide", "VB"}, {"disclose", "VB"},
      {"transfer", "VB"}, {"process", "VB"}, {"comply", "VB"}, {"meet", "VB"},
      {"take", "VB"}, {"suspend", "VB"}, {"pay", "VB"}, {"deliver", "VB"}, {"ensure", "VB"},
      {"notify", "VB"}, {"assign", "VB"}, {"solicit", "VB"}, {"recruit", "VB"},
      // nouns
      {"agreement", "NN"}, {"party", "NN"}, {"parties", "NNS"}, {"data", "NNS"},
      {"information", "NN"}, {"services", "NNS"}, {"nothing", "NN"}, {"details", "NNS"},
      {"contract", "NN"}, {"contracts", "NNS"}, {"clause", "NN"}, {"clauses", "NNS"},
      {"section", "NN"}, {"year", "NN"}, {"employment", "NN"}, {"consent", "NN"},
      {"notice", "NN"}, {"purposes", "NNS"}, {"person", "NN"}, {"case", "NN"},
      // adjectives
      {"written", "JJ"}, {"confidential", "JJ"}, {"personal", "JJ"}, {"third", "JJ"},
      {"individual", "JJ"}, {"reasonable", "JJ"}, {"fifth", "JJ"}, {"applicable", "JJ"},
      {"secret", "JJ"}, {"relevant", "JJ"}, {"necessary", "JJ"}, {"approved", "JJ"},
  };
  return lex;
}

std::string punct_tag(std::string_view token) {
  if (token == "," ) return ",";
  if (token == "." || token == "!" || token == "?") return ".";
  if (token == ":" || token == ";" || token == "-" || token == "--") return ":";
  if (token == "(" || token == "[" || token == "{") return "(";
  if (token == ")" || token == "]" || token == "}") return ")";
  if (token == "\"" || token == "``") return "``";
  if (token == "''") return "''";
  if (token == "$") return "$";
  if (token == "#") return "#";
  return "SYM";
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() > suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

bool is_list_marker_token(std::string_view tok) {
  if (tok.size() < 2 || tok.size() > 8) return false;
  std::smatch m;
  const std::string s(tok);
  return std::regex_match(s, m, marker_regex());
}

}  // namespace

std::string_view label_name(ClassLabel label) { return kLabelNames[label_index(label)]; }
std::string_view label_title(ClassLabel label) { return kLabelTitles[label_index(label)]; }

std::optional<ClassLabel> parse_label(std::string_view name) {
  for (int i = 0; i < kNumClasses; ++i)
    if (kLabelNames[i] == name) return static_cast<ClassLabel>(i);
  return std::nullopt;
}

ClassLabel label_from_index(int index) {
  if (index < 0 || index >= kNumClasses)
    throw std::out_of_range("class index " + std::to_string(index) + " out of range");
  return static_cast<ClassLabel>(index);
}

std::string_view shape_name(Shape shape) { return kShapeNames[static_cast<int>(shape)]; }

std::optional<Shape> parse_shape(std::string_view name) {
  for (int i = 0; i < kNumShapes; ++i)
    if (kShapeNames[i] == name) return static_cast<Shape>(i);
  return std::nullopt;
}

const std::vector<std::string>& pos_tags() {
  static const std::vector<std::string> tags = {
      "CC",  "CD",  "DT",   "EX",  "FW",  "IN",  "JJ",  "JJR", "JJS", "LS",  "MD", "NN",
      "NNS", "NNP", "NNPS", "PDT", "POS", "PRP", "PRP$", "RB", "RBR", "RBS", "RP", "SYM",
      "TO",  "UH",  "VB",   "VBD", "VBG", "VBN", "VBP", "VBZ", "WDT", "WP",  "WP$", "WRB",
      ",",   ".",   ":",    "(",   ")",   "``",  "''",  "#",   "$"};
  return tags;
}

int pos_index(std::string_view tag) {
  const auto& tags = pos_tags();
  const auto it = std::find(tags.begin(), tags.end(), tag);
  return it == tags.end() ? -1 : static_cast<int>(it - tags.begin());
}

std::string Section::joined_text() const {
  std::string out;
  for (const Sentence& s : sentences) {
    if (!out.empty()) out += ' ';
    out += s.text;
  }
  return out;
}

std::vector<Segment> split_sentences(std::string_view text) {
  std::vector<Segment> out;
  std::size_t start = skip_space(text, 0);
  for (std::size_t i = start; i < text.size(); ++i) {
    if (!is_boundary(text, start, i)) continue;
    std::size_t end = i + 1;
    while (end < text.size() && (text[end] == '"' || text[end] == '\'' || text[end] == ')')) ++end;
    split_clause_list(text, start, end, out);
    start = skip_space(text, end);
    i = start == 0 ? 0 : start - 1;
  }
  if (start < text.size()) split_clause_list(text, start, text.size(), out);
  return out;
}

std::vector<std::string> tokenize(std::string_view sentence_text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < sentence_text.size()) {
    while (i < sentence_text.size() && is_space(sentence_text[i])) ++i;
    std::size_t j = i;
    while (j < sentence_text.size() && !is_space(sentence_text[j])) ++j;
    if (j == i) break;
    std::string_view chunk = sentence_text.substr(i, j - i);
    i = j;

    std::vector<std::string> tail;
    // Marker with trailing punctuation, e.g. "(a)," keeps "(a)" whole.
    while (!chunk.empty()) {
      if (is_list_marker_token(chunk)) break;
      const char c = chunk.back();
      const bool closer = c == ')' && chunk.find('(') == std::string_view::npos;
      if (c == '.' || c == ',' || c == ';' || c == ':' || c == '!' || c == '?' || c == '"' ||
          closer) {
        tail.emplace_back(1, c);
        chunk.remove_suffix(1);
        continue;
      }
      break;
    }
    std::vector<std::string> head;
    while (!chunk.empty() && !is_list_marker_token(chunk)) {
      const char c = chunk.front();
      const bool opener = c == '(' && chunk.find(')') == std::string_view::npos;
      if (opener || c == '"') {
        head.emplace_back(1, c);
        chunk.remove_prefix(1);
        continue;
      }
      break;
    }
    for (auto& h : head) out.push_back(std::move(h));
    if (!chunk.empty()) out.emplace_back(chunk);
    for (auto it = tail.rbegin(); it != tail.rend(); ++it) out.push_back(std::move(*it));
  }
  return out;
}

Shape compute_shape(std::string_view s) {
  if (s.empty()) return Shape::Other;
  if (std::all_of(s.begin(), s.end(), is_ascii_punct)) return Shape::Punct;
  {
    static const std::regex list_re(R"(^\(?[a-z0-9]{1,4}[\).]$)");
    const std::string str(s);
    if (std::regex_match(str, list_re)) return Shape::ListMarker;
  }
  if (std::all_of(s.begin(), s.end(), is_digit)) return Shape::AllDigits;
  const bool all_alpha = std::all_of(s.begin(), s.end(), is_alpha);
  if (all_alpha) {
    if (std::all_of(s.begin(), s.end(), is_upper)) return Shape::AllCaps;
    if (std::all_of(s.begin(), s.end(), is_lower)) return Shape::AllLower;
    if (is_upper(s[0]) && std::all_of(s.begin() + 1, s.end(), is_lower)) return Shape::InitCap;
    return Shape::MixedAlnum;
  }
  const bool alnum = std::all_of(s.begin(), s.end(), [](char c) { return is_alpha(c) || is_digit(c); });
  if (alnum) return Shape::MixedAlnum;
  return Shape::Other;
}

std::vector<std::string> tag_pos(const std::vector<std::string>& tokens) {
  std::vector<std::string> tags;
  tags.reserve(tokens.size());
  for (std::size_t k = 0; k < tokens.size(); ++k) {
    const std::string& tok = tokens[k];
    const std::string low = lower(tok);
    const std::string prev = tags.empty() ? std::string() : tags.back();
    std::string tag;
    if (is_list_marker_token(tok)) {
      tag = "LS";
    } else if (std::all_of(tok.begin(), tok.end(), is_ascii_punct)) {
      tag = punct_tag(tok);
    } else if (std::all_of(tok.begin(), tok.end(), [](char c) { return is_digit(c) || c == '.' || c == ','; })) {
      tag = "CD";
    } else if (ends_with(low, "'s") || low == "'s") {
      tag = "NNP";
    } else if (auto it = lexicon().find(low); it != lexicon().end()) {
      tag = it->second;
      // Base verbs after modals, "to" and negation.
      if ((prev == "MD" || prev == "TO" || (prev == "RB" && k >= 2 && tags[k - 2] == "MD")) &&
          (tag == "VBP" || tag == "NN")) {
        tag = "VB";
      }
    } else if (k > 0 && is_upper(tok[0])) {
      tag = ends_with(low, "s") ? "NNPS" : "NNP";
    } else if (prev == "MD" || prev == "TO") {
      tag = "VB";
    } else if (ends_with(low, "ly")) {
      tag = "RB";
    } else if (ends_with(low, "ing")) {
      tag = "VBG";
    } else if (ends_with(low, "ed")) {
      tag = "VBN";
    } else if (ends_with(low, "able") || ends_with(low, "ible") || ends_with(low, "al") ||
               ends_with(low, "ive") || ends_with(low, "ous") || ends_with(low, "ful")) {
      tag = "JJ";
    } else if (ends_with(low, "est")) {
      tag = "JJS";
    } else if (ends_with(low, "tion") || ends_with(low, "ment") || ends_with(low, "ness") ||
               ends_with(low, "ity") || ends_with(low, "ance") || ends_with(low, "ence")) {
      tag = "NN";
    } else if (ends_with(low, "ss")) {
      tag = "NN";
    } else if (ends_with(low, "s")) {
      tag = "NNS";
    } else if (k == 0 && is_upper(tok[0])) {
      tag = "NNP";
    } else {
      tag = "NN";
    }
    tags.push_back(std::move(tag));
  }
  return tags;
}

std::vector<TokenRecord> make_tokens(const std::vector<std::string>& surfaces,
                                     const std::vector<std::string>& existing_tags) {
  const bool pretagged = !existing_tags.empty() && existing_tags.size() == surfaces.size();
  const std::vector<std::string> tags = pretagged ? existing_tags : tag_pos(surfaces);
  std::vector<TokenRecord> out;
  out.reserve(surfaces.size());
  for (std::size_t i = 0; i < surfaces.size(); ++i)
    out.push_back(TokenRecord{surfaces[i], tags[i], compute_shape(surfaces[i])});
  return out;
}

Sentence make_sentence(std::string text, std::optional<ClassLabel> gold, CharSpan span,
                       std::size_t max_tokens) {
  Sentence s;
  std::vector<std::string> surfaces = tokenize(text);
  if (surfaces.size() > max_tokens) {
    surfaces.resize(max_tokens);
    s.truncated = true;
  }
  s.tokens = make_tokens(surfaces);
  s.text = std::move(text);
  s.gold = gold;
  s.span = span;
  return s;
}

std::vector<Section> assemble_section(const std::string& doc_id, const std::string& section_id,
                                      std::string_view raw_text,
                                      const std::vector<ClassLabel>& gold_labels,
                                      const AssembleOptions& options) {
  const std::vector<Segment> segments = split_sentences(raw_text);
  if (!gold_labels.empty() && gold_labels.size() != segments.size()) {
    throw AlignmentError("section " + doc_id + "/" + section_id + ": " +
                         std::to_string(gold_labels.size()) + " labels for " +
                         std::to_string(segments.size()) + " sentences");
  }
  std::vector<Sentence> sentences;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    std::optional<ClassLabel> gold;
    if (!gold_labels.empty()) gold = gold_labels[i];
    Sentence s = make_sentence(segments[i].text, gold, segments[i].span, options.max_tokens);
    if (!s.tokens.empty()) sentences.push_back(std::move(s));
  }
  std::vector<Section> out;
  const std::size_t cap = std::max<std::size_t>(1, options.max_sentences);
  const std::size_t chunks = (sentences.size() + cap - 1) / cap;
  for (std::size_t c = 0; c < chunks; ++c) {
    Section sec;
    sec.doc_id = doc_id;
    sec.section_id = chunks > 1 ? section_id + "#" + std::to_string(c + 1) : section_id;
    const std::size_t lo = c * cap;
    const std::size_t hi = std::min(sentences.size(), lo + cap);
    sec.sentences.assign(std::make_move_iterator(sentences.begin() + static_cast<std::ptrdiff_t>(lo)),
                         std::make_move_iterator(sentences.begin() + static_cast<std::ptrdiff_t>(hi)));
    out.push_back(std::move(sec));
  }
  return out;
}

}  // namespace deontic::text
