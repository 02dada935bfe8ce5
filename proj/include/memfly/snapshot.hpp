#pragma once

#include <filesystem>
#include <string>

#include "memfly/memory_graph.hpp"

namespace memfly {

inline constexpr int kSnapshotSchemaVersion = 1;

/// Serializes the whole graph to one JSON document. Keys appear in schema
/// order and the last field is a CRC-32 of everything before it.
std::string snapshot_dump(const MemoryGraph& g);

/// Inverse of snapshot_dump. Throws CorruptSnapshot on parse or checksum
/// failure and SchemaVersionMismatch on an unknown schema.
MemoryGraph snapshot_parse(const std::string& text);

/// Writes via a temporary file and rename so readers never see a partial file.
void snapshot_save(const MemoryGraph& g, const std::filesystem::path& path);
MemoryGraph snapshot_load(const std::filesystem::path& path);

} // namespace memfly
