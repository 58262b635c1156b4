// Copyright 2026 The vidanno Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Talks to the library through the C interface only.

#include <vidanno/vidanno.h>

#include <CLI11.hpp>

#include <cstdio>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace {

struct Failure {
  vidanno_status status;
};

void check(vidanno_status s) {
  if (s != VIDANNO_OK) throw Failure{s};
}

struct ConfigDeleter {
  void operator()(vidanno_config* c) const { vidanno_config_destroy(c); }
};
using ConfigPtr = std::unique_ptr<vidanno_config, ConfigDeleter>;

void print_and_free(char* text) {
  if (!text) return;
  std::fputs(text, stdout);
  vidanno_string_free(text);
}

struct Options {
  std::string config_file;
  std::vector<std::string> overrides;
  bool quiet = false;
};

ConfigPtr make_config(const Options& opt) {
  vidanno_config* raw = nullptr;
  check(vidanno_config_create(&raw));
  ConfigPtr cfg(raw);
  if (!opt.config_file.empty()) check(vidanno_config_load(cfg.get(), opt.config_file.c_str()));
  for (const auto& o : opt.overrides) check(vidanno_config_apply(cfg.get(), o.c_str()));
  check(vidanno_config_validate(cfg.get()));
  return cfg;
}

void print_report(vidanno_report* report) {
  char* text = nullptr;
  const vidanno_status s = vidanno_report_format(report, &text);
  vidanno_report_destroy(report);
  check(s);
  print_and_free(text);
}

void run_eval(const vidanno_config* cfg) {
  vidanno_report* report = nullptr;
  check(vidanno_eval(cfg, &report));
  print_report(report);
}

void log_to_stderr(int level, const char* message, void* user) {
  const bool quiet = *static_cast<const bool*>(user);
  if (level == 0 && quiet) return;
  std::fprintf(stderr, "%s%s\n", level == 1 ? "warning: " : "", message);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semi-automatic video bounding-box annotation"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(vidanno_version()));
  Options opt;
  app.add_option("-c,--config", opt.config_file, "Run configuration file")->check(CLI::ExistingFile);
  app.add_option("-s,--set", opt.overrides, "Override a config key (key=value); repeatable");
  app.add_flag("-q,--quiet", opt.quiet, "Only print warnings and results");

  using Stage = std::function<void(const vidanno_config*)>;
  auto summary_stage = [](vidanno_status (*fn)(const vidanno_config*, char**)) -> Stage {
    return [fn](const vidanno_config* cfg) {
      char* text = nullptr;
      check(fn(cfg, &text));
      print_and_free(text);
    };
  };
  std::vector<std::pair<CLI::App*, Stage>> stages;
  auto add = [&](const char* name, const char* help, Stage fn) {
    CLI::App* sub = app.add_subcommand(name, help);
    stages.emplace_back(sub, std::move(fn));
    return sub;
  };
  add("synth", "Generate synthetic sequences into the data directory", summary_stage(vidanno_synth));
  add("split", "Split sequences into train/val/test and index windows", summary_stage(vidanno_split));
  add("train-assess", "Train the quality scoring network", summary_stage(vidanno_train_assess));
  add("train-refine", "Train the geometry network (and the conv mask predictor if selected)",
      summary_stage(vidanno_train_refine));
  add("annotate", "Annotate sequences: annotation file, failure list, diagnostics", summary_stage(vidanno_annotate));
  std::string eval_annotations, eval_gt;
  CLI::App* eval = add("eval", "Evaluate annotations against ground truth", run_eval);
  eval->add_option("--annotations", eval_annotations, "Evaluate this annotation file instead of the annotate outputs");
  eval->add_option("--ground-truth", eval_gt, "Ground-truth annotation file for --annotations");
  add("report", "Ablation table and plots", summary_stage(vidanno_report_stage));
  add("run", "synth, split, train-assess, train-refine, annotate, eval, report", [&](const vidanno_config* cfg) {
    for (auto fn : {vidanno_synth, vidanno_split, vidanno_train_assess, vidanno_train_refine, vidanno_annotate}) {
      check(fn(cfg, nullptr));
    }
    run_eval(cfg);
    summary_stage(vidanno_report_stage)(cfg);
  });
  add("config", "Print the effective configuration", [](const vidanno_config* cfg) {
    char* text = nullptr;
    check(vidanno_config_dump(cfg, &text));
    print_and_free(text);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  vidanno_set_log_callback(log_to_stderr, &opt.quiet);
  try {
    if (!eval_annotations.empty()) opt.overrides.push_back("eval.annotations=" + eval_annotations);
    if (!eval_gt.empty()) opt.overrides.push_back("eval.ground_truth=" + eval_gt);
    const ConfigPtr cfg = make_config(opt);
    for (const auto& [sub, fn] : stages) {
      if (sub->parsed()) fn(cfg.get());
    }
  } catch (const Failure& f) {
    std::fprintf(stderr, "error: %s\n", vidanno_last_error());
    return static_cast<int>(f.status);
  }
  return 0;
}
