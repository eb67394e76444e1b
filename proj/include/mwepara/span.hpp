#pragma once

#include <cstddef>

namespace mwepara {

// Byte offsets [begin, end) into a UTF-8 sentence.
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool operator==(const Span&) const = default;
};

}  // namespace mwepara
