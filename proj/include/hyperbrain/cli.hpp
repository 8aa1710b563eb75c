#pragma once

#include <filesystem>
#include <ostream>

#include "hyperbrain/config.hpp"

namespace hyperbrain::cli {

// Pipeline commands. Each writes into out_dir and copies the effective
// config there as config.json.
void cmd_generate(const PipelineConfig& cfg, const std::filesystem::path& out_dir);
void cmd_build(const PipelineConfig& cfg, const std::filesystem::path& signals_dir,
               const std::filesystem::path& out_dir);
void cmd_train(const PipelineConfig& cfg, const std::filesystem::path& graphs_dir, const std::filesystem::path& out_dir,
               unsigned threads, std::ostream& log);
void cmd_score(const PipelineConfig& cfg, const std::filesystem::path& checkpoint, const std::filesystem::path& graph_file,
               const std::filesystem::path& edges_file, const std::filesystem::path& out_dir, unsigned threads);
void cmd_eval(const PipelineConfig& cfg, const std::filesystem::path& checkpoint,
              const std::filesystem::path& test_graphs_dir, const std::filesystem::path& index_file,
              const std::filesystem::path& out_dir, unsigned threads, std::ostream& log);
void cmd_walk_debug(const PipelineConfig& cfg, const std::filesystem::path& graph_file, const graph::NodeSet& edge,
                    int t, const std::filesystem::path& out_dir);

/// Parses "a|b|c" into a sorted node set.
graph::NodeSet parse_nodes(const std::string& text);

/// Entry point; returns 0 on success, 1 on usage errors, 2 on data errors.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hyperbrain::cli
