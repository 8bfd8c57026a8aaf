#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "vaetpp/events.hpp"

namespace vaetpp {

enum class SequenceFormat { jsonl, csv };

/// Picks the format from the file extension (.csv, otherwise jsonl).
SequenceFormat format_for_path(const std::string& path);

/// Reads a dataset. Every sequence shares one type vocabulary: U is the largest
/// declared or observed value in the file. For CSV input the horizon of each
/// sequence is its last timestamp unless `<path>.meta.json` supplies "T"
/// (a number, or an object keyed by seq_id) and optionally "U".
Dataset load_sequences(const std::string& path, SequenceFormat format);
Dataset load_sequences(const std::string& path);

Dataset parse_jsonl(std::istream& in);
Dataset parse_csv(std::istream& in);

void write_jsonl(const std::vector<EventSequence>& sequences, std::ostream& out);
void write_jsonl(const std::vector<EventSequence>& sequences, const std::string& path);

/// {"train": [ids], "val": [ids], "test": [ids]}
void write_split_assignment(const Dataset& ds, const std::string& path);
/// Applies an assignment written by write_split_assignment; unknown ids are an error.
Dataset apply_split_assignment(Dataset ds, const std::string& path);

} // namespace vaetpp
