#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <random>
#include <regex>
#include <string>
#include <vector>

#include "resgrad/backward.hpp"

namespace resgrad::test {

struct ParserCase {
  const char* name;
  std::string input;
  std::optional<std::string> local;
  /// nullopt means STOP_GRADIENT.
  std::optional<std::string> upstream;
  FaultClass fault;
};

inline void PrintTo(const ParserCase& c, std::ostream* os) { *os << c.name; }

// clang-format off
inline const std::vector<ParserCase>& parser_conformance_cases() {
  static const std::vector<ParserCase> cases = {
    // Pure local defects.
    {"canonical_local", "LOCAL:\nFix the format.\nUPSTREAM:\nSTOP_GRADIENT", "Fix the format.", std::nullopt, FaultClass::pure_local},
    {"inline_headers", "LOCAL: Fix the format.\nUPSTREAM: STOP_GRADIENT", "Fix the format.", std::nullopt, FaultClass::pure_local},
    {"lowercase_stop", "LOCAL:\nBe concise.\nUPSTREAM:\nstop_gradient", "Be concise.", std::nullopt, FaultClass::pure_local},
    {"stop_trailing_period", "LOCAL:\nBe concise.\nUPSTREAM:\nSTOP_GRADIENT.", "Be concise.", std::nullopt, FaultClass::pure_local},
    {"stop_in_backticks", "LOCAL:\nBe concise.\nUPSTREAM:\n`STOP_GRADIENT`", "Be concise.", std::nullopt, FaultClass::pure_local},
    {"stop_in_bold", "LOCAL:\nBe concise.\nUPSTREAM:\n**STOP_GRADIENT**", "Be concise.", std::nullopt, FaultClass::pure_local},
    {"bold_headers", "**LOCAL:**\nUse JSON.\n**UPSTREAM:**\nSTOP_GRADIENT", "Use JSON.", std::nullopt, FaultClass::pure_local},
    {"markdown_heading_headers", "## Local:\nUse JSON.\n## Upstream:\nSTOP_GRADIENT", "Use JSON.", std::nullopt, FaultClass::pure_local},
    {"crlf_line_endings", "LOCAL:\r\nUse JSON.\r\nUPSTREAM:\r\nSTOP_GRADIENT\r\n", "Use JSON.", std::nullopt, FaultClass::pure_local},
    {"multiline_local", "LOCAL:\nLine one.\nLine two.\nUPSTREAM:\nSTOP_GRADIENT", "Line one.\nLine two.", std::nullopt, FaultClass::pure_local},
    {"surrounding_whitespace", "\n\n  LOCAL:\n  Indent fix.  \n\nUPSTREAM:\n  STOP_GRADIENT  \n", "Indent fix.", std::nullopt, FaultClass::pure_local},
    {"empty_upstream_section", "LOCAL:\nFix it.\nUPSTREAM:\n", "Fix it.", std::nullopt, FaultClass::pure_local},
    {"reversed_section_order", "UPSTREAM:\nSTOP_GRADIENT\nLOCAL:\nFix order.", "Fix order.", std::nullopt, FaultClass::pure_local},
    // Pure upstream defects.
    {"canonical_upstream", "LOCAL:\n\nUPSTREAM:\nThe retrieved context lacks the entity.", std::nullopt, "The retrieved context lacks the entity.", FaultClass::pure_upstream},
    {"adjacent_headers", "LOCAL:\nUPSTREAM:\nMissing date in query.", std::nullopt, "Missing date in query.", FaultClass::pure_upstream},
    {"multiline_upstream", "LOCAL:\n\nUPSTREAM:\nFirst issue.\nSecond issue.", std::nullopt, "First issue.\nSecond issue.", FaultClass::pure_upstream},
    {"bold_keyword_headers", "**LOCAL**:\n\n**UPSTREAM**:\nQuery was truncated.", std::nullopt, "Query was truncated.", FaultClass::pure_upstream},
    {"mixed_case_headers", "Local:   \nUpstream:\nNeeds the author name.", std::nullopt, "Needs the author name.", FaultClass::pure_upstream},
    {"stop_token_with_words", "LOCAL:\n\nUPSTREAM:\nSTOP_GRADIENT is wrong here; the input lacks data.", std::nullopt, "STOP_GRADIENT is wrong here; the input lacks data.", FaultClass::pure_upstream},
    {"stop_token_misspelled", "LOCAL:\n\nUPSTREAM:\nSTOP GRADIENT", std::nullopt, "STOP GRADIENT", FaultClass::pure_upstream},
    // Mixed faults.
    {"canonical_mixed", "LOCAL:\nTighten format.\nUPSTREAM:\nThe evidence was incomplete.", "Tighten format.", "The evidence was incomplete.", FaultClass::mixed},
    {"inline_mixed", "LOCAL: Cite sources.\nUPSTREAM: Retriever returned the wrong page.", "Cite sources.", "Retriever returned the wrong page.", FaultClass::mixed},
    {"markdown_bullets_mixed", "### LOCAL:\n- Use bullet points.\n### UPSTREAM:\n- Provide the date.", "- Use bullet points.", "- Provide the date.", FaultClass::mixed},
    {"first_headers_win", "LOCAL:\nA.\nUPSTREAM:\nB.\nLOCAL:\nC.", "A.", "B.\nLOCAL:\nC.", FaultClass::mixed},
    // Nothing actionable.
    {"empty_local_and_stop", "LOCAL:\n\nUPSTREAM:\nSTOP_GRADIENT", std::nullopt, std::nullopt, FaultClass::none},
    {"both_sections_empty", "LOCAL:\nUPSTREAM:", std::nullopt, std::nullopt, FaultClass::none},
    {"empty_completion", "", std::nullopt, std::nullopt, FaultClass::none},
    // Malformed: whole completion becomes LOCAL, upstream stops.
    {"no_headers", "garbage with no headers", "garbage with no headers", std::nullopt, FaultClass::pure_local},
    {"missing_upstream_header", "LOCAL:\nOnly local section.", "LOCAL:\nOnly local section.", std::nullopt, FaultClass::pure_local},
    {"non_header_keyword", "LOCAL FIX: tweak\nUPSTREAM: none", "LOCAL FIX: tweak\nUPSTREAM: none", std::nullopt, FaultClass::pure_local},
  };
  return cases;
}
// clang-format on

/// Independent header detector used as the fuzz oracle for the fallback rule.
inline bool has_header_line(const std::string& text, const char* keyword) {
  const std::regex re(std::string("(^|\\n)[ \\t*_`#>]*") + keyword + "[*_` ]*:", std::regex::icase);
  return std::regex_search(text, re);
}

/// Deterministic corpus of header mutations and random byte strings.
inline std::vector<std::string> parser_fuzz_corpus(std::size_t n, std::uint64_t seed) {
  static const std::vector<std::string> heads = {"LOCAL:",  "local:", "**LOCAL**:", "## Local:", "LOCAL",   "LOCAL -",
                                                 "LOCL:",   "UPSTREAM:", "upstream:", "**UPSTREAM:**", "UPSTREAM",
                                                 "UP STREAM:", "> Upstream:", "`LOCAL`:", ":", "LOCAL::"};
  static const std::vector<std::string> bodies = {"",  "Fix it.", "STOP_GRADIENT", "stop_gradient.", "STOP_GRADIENT!!",
                                                  "  ", "\r",     "\n\n",          "**",             "Missing evidence.",
                                                  "LOCAL:", "UPSTREAM:", "\xff\xfe", std::string("\0x", 2), "é中文"};
  std::mt19937_64 rng(seed);
  std::vector<std::string> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::string s;
    if (i % 4 == 3) {
      const auto len = rng() % 200;
      for (std::size_t k = 0; k < len; ++k) s.push_back(static_cast<char>(rng() & 0xff));
    } else {
      const auto parts = 1 + rng() % 6;
      for (std::size_t k = 0; k < parts; ++k) {
        s += heads[rng() % heads.size()];
        s += (rng() % 2) ? "\n" : " ";
        s += bodies[rng() % bodies.size()];
        s += (rng() % 3) ? "\n" : "\r\n";
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace resgrad::test
