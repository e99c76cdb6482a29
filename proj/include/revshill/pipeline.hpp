#pragma once

// One function per CLI subcommand. Every command reads its inputs from the
// output directory, writes its artifacts there and records a manifest with
// input/output hashes, the config snapshot, the seed and wall-clock timings.

#include "revshill/config.hpp"
#include "revshill/evalharness.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace revshill::pipeline {

struct Dataset {
  corpus::Corpus corpus;
  corpus::Split split;
  text::Vocabulary vocab;
  rbrs::ReviewHistory history;  // training split only
};

std::filesystem::path artifact(const config::ExperimentConfig& cfg, const std::string& name);

// Throws MissingPrerequisite naming `label` when the artifact (or the manifest
// that produced it) is absent or its hash no longer matches.
void require(const config::ExperimentConfig& cfg, const std::string& file, const std::string& label,
             const std::string& producer);

Dataset load_dataset(const config::ExperimentConfig& cfg);

std::vector<std::string> arg_training_items(const config::ExperimentConfig& cfg, const Dataset& ds);
std::vector<std::string> eval_items(const config::ExperimentConfig& cfg, const Dataset& ds);

void cmd_ingest(const config::ExperimentConfig& cfg);
void cmd_train_rbrs(const config::ExperimentConfig& cfg);
void cmd_train_lm(const config::ExperimentConfig& cfg);
void cmd_train_abae(const config::ExperimentConfig& cfg);
void cmd_pretrain_arg(const config::ExperimentConfig& cfg);
// Uses cfg.arg.mask.
void cmd_train_arg(const config::ExperimentConfig& cfg);
// attacker: copycat | textbugger | hotflip | arg (the ARG of cfg.arg.mask) | none
void cmd_attack(const config::ExperimentConfig& cfg, const std::string& attacker);
// Without an attacker: every baseline plus the ARG of each ablation mask.
void cmd_eval(const config::ExperimentConfig& cfg, const std::optional<std::string>& attacker);
void cmd_adv_train(const config::ExperimentConfig& cfg);
void cmd_report(const config::ExperimentConfig& cfg);

// ingest through report, training one ARG per ablation mask.
void run_all(const config::ExperimentConfig& cfg);

// Name of the evaluation report for an attacker ("arg" expands to arg-<mask>).
std::string report_name(const std::string& attacker, const std::string& mask);

}  // namespace revshill::pipeline
