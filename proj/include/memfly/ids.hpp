#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <string>

namespace memfly {

/// Opaque 64-bit identifier, one counter per entity kind. Zero is reserved
/// for "not yet assigned".
template <class Tag>
struct Id {
    std::uint64_t value = 0;

    constexpr Id() = default;
    constexpr explicit Id(std::uint64_t v) : value(v) {}

    constexpr bool valid() const noexcept { return value != 0; }
    constexpr auto operator<=>(const Id&) const = default;
};

struct NoteTag {};
struct KeywordTag {};
struct TopicTag {};

using NoteId = Id<NoteTag>;
using KeywordId = Id<KeywordTag>;
using TopicId = Id<TopicTag>;

} // namespace memfly

template <class Tag>
struct std::hash<memfly::Id<Tag>> {
    std::size_t operator()(const memfly::Id<Tag>& id) const noexcept {
        return std::hash<std::uint64_t>{}(id.value);
    }
};
