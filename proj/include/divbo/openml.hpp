#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "divbo/error.hpp"

namespace divbo {

enum class OpenMLError { Network, UnknownId, Malformed };

class OpenMLException : public ValidationError {
 public:
  OpenMLException(OpenMLError code, const std::string& what)
      : ValidationError(what), code_(code) {}
  OpenMLError code() const { return code_; }

 private:
  OpenMLError code_;
};

struct OpenMLFetchResult {
  std::string path;
  std::string dataset_name;
  std::string default_target;
  bool from_cache = false;
};

namespace detail {

inline std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

struct ParsedUrl {
  bool https = false;
  std::string host;
  int port = 80;
  std::string prefix;
};

inline ParsedUrl parse_base_url(const std::string& url) {
  ParsedUrl p;
  std::string rest;
  if (url.rfind("https://", 0) == 0) {
    p.https = true;
    p.port = 443;
    rest = url.substr(8);
  } else if (url.rfind("http://", 0) == 0) {
    rest = url.substr(7);
  } else {
    throw OpenMLException(OpenMLError::Network,
                          "base URL must start with http:// or https://");
  }
  const auto slash = rest.find('/');
  std::string hostport = slash == std::string::npos ? rest : rest.substr(0, slash);
  if (slash != std::string::npos) {
    p.prefix = rest.substr(slash);
    while (!p.prefix.empty() && p.prefix.back() == '/') p.prefix.pop_back();
  }
  const auto colon = hostport.find(':');
  if (colon != std::string::npos) {
    p.host = hostport.substr(0, colon);
    p.port = std::stoi(hostport.substr(colon + 1));
  } else {
    p.host = hostport;
  }
  return p;
}

inline std::string http_get(const ParsedUrl& base, const std::string& path,
                            int* status_out) {
  auto request = [&](auto& client) -> std::string {
    client.set_connection_timeout(20);
    client.set_read_timeout(60);
    auto res = client.Get((base.prefix + path).c_str());
    if (!res) {
      throw OpenMLException(OpenMLError::Network,
                            "request to '" + base.host + path + "' failed");
    }
    *status_out = res->status;
    return res->body;
  };
  if (base.https) {
#ifdef CPPHTTPLIB_OPENSSL_SUPPORT
    httplib::SSLClient client(base.host, base.port);
    return request(client);
#else
    throw OpenMLException(OpenMLError::Network,
                          "https base URL requires TLS support; use an "
                          "http:// mirror or the CLI build");
#endif
  }
  httplib::Client client(base.host, base.port);
  return request(client);
}

}  // namespace detail

inline std::string openml_base_url() {
  if (const char* env = std::getenv("DIVBO_OPENML_BASE")) return env;
  return "https://www.openml.org";
}

// Downloads an OpenML dataset by ID as CSV. Idempotent: when the output file
// exists and matches its stored checksum the download is skipped. The file is
// written to a temporary path and renamed, so failures never leave partial
// output behind.
inline OpenMLFetchResult fetch_openml(int dataset_id, const std::string& out_path,
                                      const std::string& base_url =
                                          openml_base_url()) {
  namespace fs = std::filesystem;
  const std::string checksum_path = out_path + ".checksum";

  const auto base = detail::parse_base_url(base_url);
  int status = 0;
  const std::string meta_body = detail::http_get(
      base, "/api/v1/json/data/" + std::to_string(dataset_id), &status);
  if (status == 404 || status == 412) {
    throw OpenMLException(OpenMLError::UnknownId,
                          "unknown OpenML dataset id " +
                              std::to_string(dataset_id));
  }
  if (status != 200) {
    throw OpenMLException(OpenMLError::Network,
                          "metadata request returned status " +
                              std::to_string(status));
  }

  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(meta_body);
  } catch (const std::exception&) {
    throw OpenMLException(OpenMLError::Malformed, "metadata is not valid JSON");
  }
  if (meta.contains("error")) {
    throw OpenMLException(OpenMLError::UnknownId,
                          "unknown OpenML dataset id " +
                              std::to_string(dataset_id));
  }
  if (!meta.contains("data_set_description")) {
    throw OpenMLException(OpenMLError::Malformed,
                          "metadata lacks data_set_description");
  }
  const auto& desc = meta["data_set_description"];

  OpenMLFetchResult result;
  result.path = out_path;
  result.dataset_name = desc.value("name", "");
  result.default_target = desc.value("default_target_attribute", "");

  if (fs::exists(out_path) && fs::exists(checksum_path)) {
    std::ifstream existing(out_path, std::ios::binary);
    std::stringstream buf;
    buf << existing.rdbuf();
    std::ifstream stored(checksum_path);
    std::string recorded;
    stored >> recorded;
    if (recorded == std::to_string(detail::fnv1a64(buf.str()))) {
      result.from_cache = true;
      return result;
    }
  }

  std::string file_id;
  if (desc.contains("file_id")) {
    const auto& f = desc["file_id"];
    file_id = f.is_string() ? f.get<std::string>() : std::to_string(f.get<long>());
  } else {
    throw OpenMLException(OpenMLError::Malformed, "metadata lacks file_id");
  }

  const std::string csv_body =
      detail::http_get(base, "/data/v1/get_csv/" + file_id, &status);
  if (status == 404) {
    throw OpenMLException(OpenMLError::UnknownId,
                          "dataset file " + file_id + " not found");
  }
  if (status != 200) {
    throw OpenMLException(OpenMLError::Network,
                          "file request returned status " +
                              std::to_string(status));
  }
  if (csv_body.empty() || csv_body.find('\n') == std::string::npos) {
    throw OpenMLException(OpenMLError::Malformed, "dataset payload is not CSV");
  }

  const std::string tmp_path = out_path + ".tmp";
  {
    std::ofstream out(tmp_path, std::ios::binary);
    if (!out) {
      throw OpenMLException(OpenMLError::Network,
                            "cannot write '" + tmp_path + "'");
    }
    out << csv_body;
  }
  fs::rename(tmp_path, out_path);
  {
    std::ofstream out(checksum_path);
    out << detail::fnv1a64(csv_body) << "\n";
  }
  return result;
}

}  // namespace divbo
