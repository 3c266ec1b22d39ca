#pragma once

#include "lobexec/exec_mdp.hpp"
#include "lobexec/rs_qlearn.hpp"

#include <filesystem>
#include <string>
#include <string_view>

namespace lobexec {

/// A learned table together with the binning that indexes it.
struct TableDocument {
    QTable table;
    Binning binning;
    LearnConfig learn;
};

/// Entries are keyed by state bins and action:
/// {"state_bins": "1-0-2", "action": "Passive", "q": ..., "visits": ...}.
std::string table_to_json(const TableDocument& doc);
TableDocument table_from_json(std::string_view json);

std::string binning_to_json(const Binning& b);
Binning binning_from_json(std::string_view json);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace lobexec
