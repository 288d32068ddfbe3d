#include "factr.h"

#include <cstdlib>
#include <cstring>
#include <string>

#include "factr/dataset.hpp"
#include "factr/experiment.hpp"

namespace {

thread_local std::string g_last_error;

int set_error(const factr::Error& e) {
  g_last_error = e.what();
  switch (e.kind()) {
    case factr::ErrorKind::invalid_argument:
      return FACTR_ERR_INVALID_ARGUMENT;
    case factr::ErrorKind::io:
      return FACTR_ERR_IO;
    case factr::ErrorKind::config:
      return FACTR_ERR_CONFIG;
    case factr::ErrorKind::numeric:
      return FACTR_ERR_NUMERIC;
    case factr::ErrorKind::fault:
      return FACTR_ERR_FAULT;
  }
  return FACTR_ERR_UNKNOWN;
}

int set_error(const std::exception& e) {
  g_last_error = e.what();
  return FACTR_ERR_UNKNOWN;
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return FACTR_OK;
  } catch (const factr::Error& e) {
    return set_error(e);
  } catch (const std::exception& e) {
    return set_error(e);
  } catch (...) {
    g_last_error = "unknown error";
    return FACTR_ERR_UNKNOWN;
  }
}

const char* require(const char* arg, const char* what) {
  if (arg == nullptr) factr::raise(factr::ErrorKind::invalid_argument, std::string(what) + " is null");
  return arg;
}

}  // namespace

extern "C" {

struct factr_config {
  factr::harness::Config impl;
};

const char* factr_version(void) { return "0.1.0"; }

const char* factr_last_error(void) { return g_last_error.c_str(); }

factr_config* factr_config_create(void) {
  return new factr_config{factr::harness::Config::defaults()};
}

factr_config* factr_config_load(const char* path) {
  factr_config* out = nullptr;
  const int rc = guarded([&] {
    out = new factr_config{factr::harness::Config::load(require(path, "path"))};
  });
  return rc == FACTR_OK ? out : nullptr;
}

factr_config* factr_config_clone(const factr_config* cfg) {
  if (cfg == nullptr) return nullptr;
  return new factr_config{cfg->impl};
}

void factr_config_destroy(factr_config* cfg) { delete cfg; }

int factr_config_set(factr_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    if (cfg == nullptr) factr::raise(factr::ErrorKind::invalid_argument, "config handle is null");
    cfg->impl.set(require(key, "key"), require(value, "value"));
  });
}

int factr_config_get(const factr_config* cfg, const char* key, char* buf, size_t buf_size) {
  return guarded([&] {
    if (cfg == nullptr) factr::raise(factr::ErrorKind::invalid_argument, "config handle is null");
    const std::string& v = cfg->impl.str(require(key, "key"));
    if (buf == nullptr || buf_size < v.size() + 1) {
      factr::raise(factr::ErrorKind::invalid_argument, "buffer too small for key " + std::string(key));
    }
    std::memcpy(buf, v.c_str(), v.size() + 1);
  });
}

unsigned long long factr_config_hash(const factr_config* cfg) {
  return cfg == nullptr ? 0ULL : cfg->impl.hash();
}

int factr_gen_data(const factr_config* cfg, const char* out_dir) {
  return guarded([&] {
    if (cfg == nullptr) factr::raise(factr::ErrorKind::invalid_argument, "config handle is null");
    factr::harness::gen_data(cfg->impl, require(out_dir, "out_dir"));
  });
}

int factr_train(const factr_config* cfg, const char* dataset_dir, const char* out_dir,
                const char* variant) {
  return guarded([&] {
    if (cfg == nullptr) factr::raise(factr::ErrorKind::invalid_argument, "config handle is null");
    factr::harness::run_train(cfg->impl, require(dataset_dir, "dataset_dir"),
                              require(out_dir, "out_dir"), require(variant, "variant"));
  });
}

int factr_eval(const factr_config* cfg, const char* checkpoint, const char* split,
               const char* out_dir) {
  return guarded([&] {
    if (cfg == nullptr) factr::raise(factr::ErrorKind::invalid_argument, "config handle is null");
    factr::harness::run_eval(cfg->impl, require(checkpoint, "checkpoint"), require(split, "split"),
                             require(out_dir, "out_dir"));
  });
}

int factr_experiment(const factr_config* cfg, const char* dataset_dir, const char* out_dir) {
  return guarded([&] {
    if (cfg == nullptr) factr::raise(factr::ErrorKind::invalid_argument, "config handle is null");
    factr::harness::run_experiment(cfg->impl, require(dataset_dir, "dataset_dir"),
                                   require(out_dir, "out_dir"));
  });
}

int factr_teleop_sim(const factr_config* cfg, const char* out_dir) {
  return guarded([&] {
    if (cfg == nullptr) factr::raise(factr::ErrorKind::invalid_argument, "config handle is null");
    factr::harness::run_teleop_suite(cfg->impl, require(out_dir, "out_dir"));
  });
}

int factr_ntk_verify(const factr_config* cfg, const char* out_dir) {
  return guarded([&] {
    if (cfg == nullptr) factr::raise(factr::ErrorKind::invalid_argument, "config handle is null");
    factr::harness::run_ntk_verify(cfg->impl, require(out_dir, "out_dir"));
  });
}

int factr_dump_schedule(const factr_config* cfg, const char* out_path) {
  return guarded([&] {
    if (cfg == nullptr) factr::raise(factr::ErrorKind::invalid_argument, "config handle is null");
    factr::harness::run_dump_schedule(cfg->impl, require(out_path, "out_path"));
  });
}

char* factr_inspect(const char* path) {
  char* out = nullptr;
  guarded([&] {
    const std::string text = factr::harness::inspect_path(require(path, "path"));
    out = static_cast<char*>(std::malloc(text.size() + 1));
    if (out == nullptr) factr::raise(factr::ErrorKind::io, "out of memory");
    std::memcpy(out, text.c_str(), text.size() + 1);
  });
  return out;
}

void factr_string_free(char* s) { std::free(s); }

}  // extern "C"
