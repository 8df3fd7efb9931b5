#pragma once

// Text formats: embedding tables ("label,f0,...,f{p-1}") and small helpers
// for whole-file reads and writes.

#include "repcap/embedding.hpp"

#include <filesystem>
#include <string>

namespace repcap {

/// Throws Io when the file is missing, Format on malformed rows (with the
/// line number).
EmbeddingSet read_embeddings(const std::filesystem::path& path);
EmbeddingSet parse_embeddings(const std::string& text, const std::string& source = "<memory>");

/// Round-trip exact decimal output.
void write_embeddings(const std::filesystem::path& path, const EmbeddingSet& set);
std::string format_embeddings(const EmbeddingSet& set);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace repcap
