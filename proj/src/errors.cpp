#include "sncpd/errors.hpp"

#include <cstdio>

namespace sncpd {

namespace {

void default_warn_sink(const std::string& msg) {
  std::fprintf(stderr, "warning: %s\n", msg.c_str());
}

void (*g_warn_sink)(const std::string&) = default_warn_sink;

}  // namespace

void warn(const std::string& msg) { g_warn_sink(msg); }

void set_warn_sink(void (*sink)(const std::string&)) {
  g_warn_sink = sink ? sink : default_warn_sink;
}

}  // namespace sncpd
