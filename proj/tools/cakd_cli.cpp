#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cakd/experiments.hpp"

int main(int argc, char** argv) {
  CLI::App app{"CAKD decoupled-KL distillation experiments"};
  app.require_subcommand(1);

  auto* verify = app.add_subcommand("verify", "Run the decoupling property suite");
  bool inject = false;
  verify
      ->add_flag("--inject-epsilon-corruption", inject,
                 "Test hook: corrupt the identity check so it fails")
      ->group("");  // hidden

  std::string config_path, teacher_path, mode = "cakd-full", sweep, out_prefix = "report";
  std::vector<std::string> metrics_files;

  auto* train_teacher = app.add_subcommand("train-teacher", "Train a CE-only teacher");
  train_teacher->add_option("--config", config_path, "Experiment config file")->required();

  auto* distill = app.add_subcommand("distill", "Distill a student from a teacher checkpoint");
  distill->add_option("--config", config_path, "Experiment config file")->required();
  distill->add_option("--teacher", teacher_path, "Teacher checkpoint")->required();
  distill->add_option("--mode", mode, "ce | kd | cakd-logit | cakd-feature | cakd-full");

  auto* ablate = app.add_subcommand("ablate", "Run an ablation sweep");
  ablate->add_option("--config", config_path, "Experiment config file")->required();
  ablate->add_option("--sweep", sweep, "alpha-beta | loss-ratio | components")->required();

  auto* report = app.add_subcommand("report", "Summarize metrics CSV files");
  report->add_option("files", metrics_files, "Metrics CSV files")->required();
  report->add_option("--out", out_prefix, "Output file prefix");

  CLI11_PARSE(app, argc, argv);

  try {
    if (verify->parsed()) {
      return cakd::run_verify(inject, std::cout);
    }
    if (train_teacher->parsed()) {
      cakd::run_train_teacher(cakd::parse_config(config_path));
    } else if (distill->parsed()) {
      cakd::run_distill(cakd::parse_config(config_path), teacher_path, mode);
    } else if (ablate->parsed()) {
      cakd::run_ablate(cakd::parse_config(config_path), sweep);
    } else if (report->parsed()) {
      cakd::run_report(metrics_files, out_prefix);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
