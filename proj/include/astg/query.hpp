// Copyright 2026 The astg Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Query parsing: split a declarative query into its subject noun phrase and
// the dynamic context. A language-model backend is used when configured;
// the rule-based splitter is the offline path and the failure fallback.

#include <algorithm>
#include <array>
#include <cctype>
#include <string>
#include <string_view>
#include <vector>

#include "astg/agent_backend.hpp"
#include "astg/error.hpp"

namespace astg {

namespace detail {

inline std::string lower_word(std::string_view w) {
  std::string out;
  for (char c : w) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '\'')
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

inline bool one_of(std::string_view w, std::initializer_list<std::string_view> set) {
  return std::find(set.begin(), set.end(), w) != set.end();
}

inline bool ends_with(std::string_view w, std::string_view suffix) {
  return w.size() >= suffix.size() && w.substr(w.size() - suffix.size()) == suffix;
}

struct Token {
  std::size_t begin;
  std::string word;  // lowercased, punctuation stripped
};

inline std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    const std::size_t b = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > b) out.push_back({b, lower_word(text.substr(b, i - b))});
  }
  return out;
}

inline std::string_view trim_view(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// Words after which an -s/-ed word is a noun or modifier, not a verb.
inline bool blocks_verb(std::string_view prev) {
  return one_of(prev, {"a", "an", "the", "this", "that", "these", "those", "his", "her",
                       "their", "its", "my", "your", "our", "in", "on", "at", "with", "of",
                       "from", "by", "near", "behind", "under", "over", "beside", "wearing",
                       "holding", "two", "three", "four", "five", "some", "many", "several",
                       "both", "and", "or", "other", "another"});
}

inline bool is_finite_verb(const std::vector<Token>& toks, std::size_t i) {
  const std::string& w = toks[i].word;
  if (one_of(w, {"is", "are", "was", "were", "has", "have", "had", "does", "did", "goes", "went",
                 "ran", "sat", "stood", "came", "took", "held", "fell", "got", "gave", "left",
                 "began", "threw", "caught", "rode", "drove", "ate", "saw"}))
    return true;
  if (w.size() <= 3 || blocks_verb(toks[i - 1].word)) return false;
  if (ends_with(w, "s")) {
    return !(ends_with(w, "ss") || ends_with(w, "us") || ends_with(w, "is") ||
             ends_with(w, "ous") || ends_with(w, "'s"));
  }
  if (ends_with(w, "ed")) {
    // "dressed in", "covered by": a participle modifying the subject.
    const bool modifier = i + 1 < toks.size() && one_of(toks[i + 1].word, {"in", "by", "with"});
    return !modifier;
  }
  return false;
}

}  // namespace detail

inline bool is_interrogative(std::string_view q) {
  const auto t = detail::trim_view(q);
  if (!t.empty() && t.back() == '?') return true;
  const auto toks = detail::tokenize(t);
  if (toks.empty()) return false;
  return detail::one_of(toks.front().word, {"what", "who", "whom", "whose", "which", "where",
                                            "when", "why", "how", "is", "are", "was", "were",
                                            "does", "do", "did", "can", "could"});
}

// Rule-based splitter: np is the text before the first finite verb (or
// relative pronoun), context is the rest. Deterministic; np is always a
// prefix of the raw query.
inline ParsedQuery split_query(std::string_view raw) {
  const auto toks = detail::tokenize(raw);
  if (toks.empty()) throw QueryError("query is empty");
  std::size_t cut = toks.size();
  for (std::size_t i = 1; i < toks.size(); ++i) {
    if (detail::one_of(toks[i].word, {"who", "that", "which", "whose"}) ||
        detail::is_finite_verb(toks, i)) {
      cut = i;
      break;
    }
  }
  ParsedQuery q;
  q.raw = std::string(raw);
  if (cut == toks.size()) {
    q.np = std::string(detail::trim_view(raw));
  } else {
    q.np = std::string(detail::trim_view(raw.substr(0, toks[cut].begin)));
    auto rest = detail::trim_view(raw.substr(toks[cut].begin));
    while (!rest.empty() && (rest.back() == '.' || rest.back() == '!')) rest.remove_suffix(1);
    q.context = std::string(rest);
  }
  while (!q.np.empty() && (q.np.back() == ',' || q.np.back() == '.')) q.np.pop_back();
  return q;
}

// Parses with `backend` when given (up to 1 + retries attempts), falling back
// to split_query on any failure. Rejects empty and interrogative queries.
inline ParsedQuery parse_query(std::string_view raw, AgentBackend* backend, int retries = 1) {
  if (detail::trim_view(raw).empty()) throw QueryError("query is empty");
  if (is_interrogative(raw)) throw QueryError("interrogative queries are not supported");
  if (backend != nullptr) {
    AgentRequest req;
    req.role = AgentRole::parse;
    req.query.raw = std::string(raw);
    for (int attempt = 0; attempt <= std::clamp(retries, 0, 2); ++attempt) {
      try {
        const auto resp = backend->respond(req);
        if (!response_schema_error(req, resp)) {
          return {std::string(raw), resp.parsed->np, resp.parsed->context};
        }
      } catch (const BackendError&) {
      }
    }
  }
  return split_query(raw);
}

}  // namespace astg
