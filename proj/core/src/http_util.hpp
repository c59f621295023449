#pragma once

#include <string>
#include <utility>

#include "earlyrisk/errors.hpp"

namespace earlyrisk::detail {

struct SplitUrl {
  std::string origin;  // http://host:port
  std::string path;    // "" or "/prefix", never with a trailing slash
};

inline SplitUrl split_url(const std::string& url) {
  if (!url.starts_with("http://")) {
    throw PreconditionError("expected an http:// URL, got '" + url + "'");
  }
  const auto slash = url.find('/', 7);
  SplitUrl out{url.substr(0, slash), slash == std::string::npos ? "" : url.substr(slash)};
  while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
  if (out.origin.size() <= 7) throw PreconditionError("URL has no host: '" + url + "'");
  return out;
}

}  // namespace earlyrisk::detail
