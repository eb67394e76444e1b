#include "mwepara/mlm_backend.hpp"

#include <algorithm>

#include "mwepara/error.hpp"
#include "mwepara/text.hpp"

namespace mwepara {

void TokenSeq::push_back(TokenId id, std::string surface, bool subword) {
  ids.push_back(id);
  surfaces.push_back(std::move(surface));
  is_subword.push_back(subword);
}

void TokenSeq::append(const TokenSeq& other) {
  ids.insert(ids.end(), other.ids.begin(), other.ids.end());
  surfaces.insert(surfaces.end(), other.surfaces.begin(), other.surfaces.end());
  is_subword.insert(is_subword.end(), other.is_subword.begin(), other.is_subword.end());
}

TokenSeq TokenSeq::slice(std::size_t begin, std::size_t end) const {
  TokenSeq out;
  for (std::size_t i = begin; i < end && i < size(); ++i) {
    out.push_back(ids[i], surfaces[i], is_subword[i]);
  }
  return out;
}

bool TokenSeq::consistent() const {
  return ids.size() == surfaces.size() && ids.size() == is_subword.size();
}

std::vector<std::size_t> find_mask_positions(const TokenSeq& tokens, TokenId mask_id) {
  std::vector<std::size_t> positions;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens.ids[i] == mask_id) positions.push_back(i);
  }
  return positions;
}

TokenSeq make_masks(const BackendInfo& info, std::size_t count) {
  TokenSeq out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(info.mask_id, info.mask_token, false);
  return out;
}

std::string detokenize(const TokenSeq& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0 && !tokens.is_subword[i]) out.push_back(' ');
    out += tokens.surfaces[i];
  }
  return out;
}

TokenSeq SpanContext::with(const TokenSeq& replacement) const {
  TokenSeq out = left;
  out.append(replacement);
  out.append(right);
  return out;
}

namespace {

TokenSeq tokenize_part(const MlmBackend& backend, std::string_view part) {
  if (text::split_whitespace(part).empty()) return {};
  return backend.tokenize(part);
}

}  // namespace

SpanContext tokenize_context(const MlmBackend& backend, std::string_view text, Span span,
                             std::size_t max_replacement) {
  if (span.begin > span.end || span.end > text.size()) {
    throw Error(ErrorCode::kInvalidInput, "span out of range");
  }
  SpanContext ctx;
  ctx.left = tokenize_part(backend, text.substr(0, span.begin));
  ctx.right = tokenize_part(backend, text.substr(span.end));

  const std::size_t max_length = backend.info().max_length;
  if (max_length <= max_replacement) {
    throw Error(ErrorCode::kInvalidInput, "backend max_length too small for the span");
  }
  const std::size_t budget = max_length - max_replacement;
  if (ctx.left.size() + ctx.right.size() > budget) {
    // Give each side half the budget, then hand any slack to the other side.
    std::size_t keep_left = std::min(ctx.left.size(), budget / 2);
    const std::size_t keep_right = std::min(ctx.right.size(), budget - keep_left);
    keep_left = std::min(ctx.left.size(), budget - keep_right);
    ctx.left = ctx.left.slice(ctx.left.size() - keep_left, ctx.left.size());
    ctx.right = ctx.right.slice(0, keep_right);
  }
  return ctx;
}

}  // namespace mwepara
