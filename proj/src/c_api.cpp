// Copyright 2026 The vidanno Authors
// SPDX-License-Identifier: Apache-2.0

#include "vidanno/vidanno.h"

#include "annotation_store.hpp"
#include "common.hpp"
#include "dataset.hpp"
#include "quality_metrics.hpp"
#include "run_config.hpp"
#include "stages.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <new>
#include <string>

struct vidanno_config {
  vidanno::RunConfig cfg;
};

struct vidanno_report {
  vidanno::EvalReport report;
};

struct vidanno_annotations {
  vidanno::AnnotationFile file;
};

namespace {

thread_local std::string g_last_error;

vidanno_status status_of(vidanno::ErrorCode c) {
  switch (c) {
    case vidanno::ErrorCode::kInvalidArgument: return VIDANNO_INVALID_ARGUMENT;
    case vidanno::ErrorCode::kIo: return VIDANNO_IO_ERROR;
    case vidanno::ErrorCode::kFormat: return VIDANNO_FORMAT_ERROR;
    case vidanno::ErrorCode::kNotFound: return VIDANNO_NOT_FOUND;
    case vidanno::ErrorCode::kState: return VIDANNO_STATE_ERROR;
    case vidanno::ErrorCode::kInternal: return VIDANNO_INTERNAL_ERROR;
  }
  return VIDANNO_INTERNAL_ERROR;
}

template <typename Fn>
vidanno_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return VIDANNO_OK;
  } catch (const vidanno::Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    g_last_error = e.what();
    return VIDANNO_IO_ERROR;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return VIDANNO_INTERNAL_ERROR;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return VIDANNO_INTERNAL_ERROR;
  } catch (...) {
    g_last_error = "unknown error";
    return VIDANNO_INTERNAL_ERROR;
  }
}

void require(const void* p, const char* what) {
  if (!p) vidanno::throw_invalid(std::string(what) + " is null");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void put(char** out, const std::string& s) {
  if (out) *out = dup_string(s);
}

std::string train_text(const vidanno::TrainSummary& s) {
  return "samples=" + std::to_string(s.samples) + "\nvalidation_samples=" + std::to_string(s.validation_samples) +
         "\nsteps=" + std::to_string(s.result.steps) +
         "\ninitial_validation_loss=" + vidanno::format_double(s.result.initial_validation_loss) +
         "\nbest_validation_loss=" + vidanno::format_double(s.result.best_validation_loss) +
         "\nbest_step=" + std::to_string(s.result.best_step) + "\ncheckpoint=" + s.checkpoint.string() + "\n";
}

vidanno_source to_c(vidanno::Source s) {
  switch (s) {
    case vidanno::Source::kManual: return VIDANNO_SOURCE_MANUAL;
    case vidanno::Source::kForward: return VIDANNO_SOURCE_FORWARD;
    case vidanno::Source::kBackward: return VIDANNO_SOURCE_BACKWARD;
    case vidanno::Source::kFailure: return VIDANNO_SOURCE_FAILURE;
  }
  return VIDANNO_SOURCE_FAILURE;
}

}  // namespace

extern "C" {

const char* vidanno_version(void) { return "1.0.0"; }

const char* vidanno_status_string(vidanno_status status) {
  switch (status) {
    case VIDANNO_OK: return "ok";
    case VIDANNO_INVALID_ARGUMENT: return "invalid argument";
    case VIDANNO_IO_ERROR: return "i/o error";
    case VIDANNO_FORMAT_ERROR: return "format error";
    case VIDANNO_NOT_FOUND: return "not found";
    case VIDANNO_STATE_ERROR: return "state error";
    case VIDANNO_INTERNAL_ERROR: return "internal error";
  }
  return "unknown status";
}

const char* vidanno_last_error(void) { return g_last_error.c_str(); }

void vidanno_string_free(char* s) { std::free(s); }

void vidanno_set_log_callback(vidanno_log_fn fn, void* user) {
  if (!fn) {
    vidanno::set_log_sink(nullptr);
    return;
  }
  vidanno::set_log_sink([fn, user](vidanno::LogLevel level, std::string_view msg) {
    const std::string s(msg);
    fn(static_cast<int>(level), s.c_str(), user);
  });
}

vidanno_status vidanno_config_create(vidanno_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = new vidanno_config();
  });
}

void vidanno_config_destroy(vidanno_config* cfg) { delete cfg; }

vidanno_status vidanno_config_load(vidanno_config* cfg, const char* path) {
  return guarded([&] {
    require(cfg, "config");
    require(path, "path");
    cfg->cfg.load_file(path);
  });
}

vidanno_status vidanno_config_set(vidanno_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    require(cfg, "config");
    require(key, "key");
    require(value, "value");
    cfg->cfg.set(key, value);
  });
}

vidanno_status vidanno_config_apply(vidanno_config* cfg, const char* assignment) {
  return guarded([&] {
    require(cfg, "config");
    require(assignment, "assignment");
    cfg->cfg.apply_override(assignment);
  });
}

vidanno_status vidanno_config_get(const vidanno_config* cfg, const char* key, char** value) {
  return guarded([&] {
    require(cfg, "config");
    require(key, "key");
    require(value, "value");
    *value = dup_string(cfg->cfg.get(key));
  });
}

vidanno_status vidanno_config_dump(const vidanno_config* cfg, char** text) {
  return guarded([&] {
    require(cfg, "config");
    require(text, "text");
    *text = dup_string(cfg->cfg.to_text());
  });
}

vidanno_status vidanno_config_validate(const vidanno_config* cfg) {
  return guarded([&] {
    require(cfg, "config");
    cfg->cfg.validate();
  });
}

vidanno_status vidanno_synth(const vidanno_config* cfg, char** summary) {
  return guarded([&] {
    require(cfg, "config");
    const auto s = vidanno::cmd_synth(cfg->cfg);
    put(summary, "sequences=" + std::to_string(s.sequences.size()) + "\ndrifted_snippets=" +
                     std::to_string(s.drifted_snippets) + "\nsnippet_runs=" + std::to_string(s.snippet_runs) + "\n");
  });
}

vidanno_status vidanno_split(const vidanno_config* cfg, char** summary) {
  return guarded([&] {
    require(cfg, "config");
    const auto s = vidanno::cmd_split(cfg->cfg);
    std::string text;
    for (auto role : {vidanno::SplitRole::kTrain, vidanno::SplitRole::kValidation, vidanno::SplitRole::kTest}) {
      text += std::string(vidanno::to_string(role)) + "=" +
              std::to_string(vidanno::split_names(s.entries, role).size()) + "\n";
    }
    put(summary, text + "windows=" + std::to_string(s.windows) + "\n");
  });
}

vidanno_status vidanno_train_assess(const vidanno_config* cfg, char** summary) {
  return guarded([&] {
    require(cfg, "config");
    put(summary, train_text(vidanno::cmd_train_assess(cfg->cfg)));
  });
}

vidanno_status vidanno_train_refine(const vidanno_config* cfg, char** summary) {
  return guarded([&] {
    require(cfg, "config");
    put(summary, train_text(vidanno::cmd_train_refine(cfg->cfg)));
  });
}

vidanno_status vidanno_annotate(const vidanno_config* cfg, char** summary) {
  return guarded([&] {
    require(cfg, "config");
    const auto s = vidanno::cmd_annotate(cfg->cfg);
    put(summary, "sequences=" + std::to_string(s.sequences.size()) + "\nframes=" + std::to_string(s.frames) +
                     "\nfailures=" + std::to_string(s.failures) + "\n");
  });
}

vidanno_status vidanno_eval(const vidanno_config* cfg, vidanno_report** report) {
  return guarded([&] {
    require(cfg, "config");
    require(report, "report");
    *report = new vidanno_report{vidanno::cmd_eval(cfg->cfg)};
  });
}

vidanno_status vidanno_report_stage(const vidanno_config* cfg, char** table) {
  return guarded([&] {
    require(cfg, "config");
    put(table, vidanno::cmd_report(cfg->cfg).text);
  });
}

vidanno_status vidanno_report_get(const vidanno_report* report, const char* key, double* value) {
  return guarded([&] {
    require(report, "report");
    require(key, "key");
    require(value, "value");
    const auto& r = report->report;
    const std::string k = key;
    if (k == "miou") *value = r.miou;
    else if (k == "err_rate") *value = r.err_rate;
    else if (k == "manual_fraction") *value = r.manual_fraction;
    else if (k == "labor_reduction") *value = r.labor_reduction;
    else if (k == "frame_count") *value = r.frame_count;
    else if (k == "evaluated") *value = r.evaluated;
    else if (k == "manual") *value = r.manual;
    else if (k == "failures") *value = r.failures;
    else if (k.rfind("acc@", 0) == 0) {
      const double t = vidanno::parse_double(k.substr(4));
      const auto it = r.acc_at.find(t);
      if (it == r.acc_at.end()) vidanno::throw_not_found("report has no " + k);
      *value = it->second;
    } else {
      vidanno::throw_invalid("unknown report key '" + k + "'");
    }
  });
}

vidanno_status vidanno_report_format(const vidanno_report* report, char** text) {
  return guarded([&] {
    require(report, "report");
    require(text, "text");
    *text = dup_string(vidanno::format_report(report->report));
  });
}

void vidanno_report_destroy(vidanno_report* report) { delete report; }

vidanno_status vidanno_annotations_read(const char* path, vidanno_annotations** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new vidanno_annotations{vidanno::read_annotations(path)};
  });
}

void vidanno_annotations_destroy(vidanno_annotations* ann) { delete ann; }

vidanno_status vidanno_annotations_count(const vidanno_annotations* ann, size_t* count) {
  return guarded([&] {
    require(ann, "annotations");
    require(count, "count");
    *count = ann->file.records.size();
  });
}

vidanno_status vidanno_annotations_record(const vidanno_annotations* ann, size_t index, int* frame_idx,
                                          vidanno_source* source, double box[4], int* has_box, double* quality,
                                          int* has_quality) {
  return guarded([&] {
    require(ann, "annotations");
    if (index >= ann->file.records.size()) vidanno::throw_invalid("record index out of range");
    const auto& r = ann->file.records[index];
    if (frame_idx) *frame_idx = r.frame_idx;
    if (source) *source = to_c(r.source);
    if (box && r.box) {
      box[0] = r.box->x_min;
      box[1] = r.box->y_min;
      box[2] = r.box->x_max;
      box[3] = r.box->y_max;
    }
    if (has_box) *has_box = r.box ? 1 : 0;
    if (quality && r.quality) *quality = *r.quality;
    if (has_quality) *has_quality = r.quality ? 1 : 0;
  });
}

vidanno_status vidanno_annotations_evaluate(const vidanno_annotations* ann, const char* ground_truth_path,
                                            const double* thresholds, size_t threshold_count,
                                            vidanno_report** report) {
  return guarded([&] {
    require(ann, "annotations");
    require(ground_truth_path, "ground_truth_path");
    require(report, "report");
    if (threshold_count > 0) require(thresholds, "thresholds");
    vidanno::validate_finished(ann->file.records, ann->file.meta);
    const auto gt = vidanno::read_ground_truth(ground_truth_path, ann->file.meta);
    const std::vector<double> t = threshold_count > 0 ? std::vector<double>(thresholds, thresholds + threshold_count)
                                                      : vidanno::kDefaultAccThresholds;
    *report = new vidanno_report{vidanno::evaluate(ann->file.records, gt, t)};
  });
}

vidanno_status vidanno_iou(const double a[4], const double b[4], double* out) {
  return guarded([&] {
    require(a, "a");
    require(b, "b");
    require(out, "out");
    const vidanno::BBox ba{a[0], a[1], a[2], a[3]}, bb{b[0], b[1], b[2], b[3]};
    vidanno::require_valid(ba, "box a");
    vidanno::require_valid(bb, "box b");
    *out = vidanno::iou(ba, bb);
  });
}

vidanno_status vidanno_quality_from_iou(double iou, double alpha, double beta, double* out) {
  return guarded([&] {
    require(out, "out");
    const vidanno::QualityMapParams p{alpha, beta};
    vidanno::validate(p);
    if (!(iou >= 0.0 && iou <= 1.0)) vidanno::throw_invalid("iou must lie in [0, 1]");
    *out = vidanno::quality_from_iou(iou, p);
  });
}

vidanno_status vidanno_labor_reduction(int manual, int failures, int frame_count, double* out) {
  return guarded([&] {
    require(out, "out");
    *out = vidanno::labor_reduction(manual, failures, frame_count);
  });
}

}  // extern "C"
