#include "canvi/dataset_io.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace canvi {

std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string dataset_to_csv(const JointDataset& ds) {
  std::ostringstream out;
  out << "# task=" << ds.task_name << " seed=" << ds.seed
      << " stream=" << ds.stream_id << " role=" << to_string(ds.role)
      << " theta_dim=" << ds.theta_dim << " x_dim=" << ds.x_dim << "\n";
  for (int j = 0; j < ds.theta_dim; ++j) out << (j ? "," : "") << "theta" << j;
  for (int j = 0; j < ds.x_dim; ++j) out << ",x" << j;
  out << "\n";
  const std::size_t n = ds.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (int j = 0; j < ds.theta_dim; ++j) {
      if (j) out << ",";
      out << format_full(ds.thetas[i * ds.theta_dim + j]);
    }
    for (int j = 0; j < ds.x_dim; ++j) {
      out << "," << format_full(ds.xs[i * ds.x_dim + j]);
    }
    out << "\n";
  }
  return out.str();
}

void write_dataset_csv(const JointDataset& ds, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << dataset_to_csv(ds);
  if (!f) throw std::runtime_error("write failed: " + path);
}

namespace {

std::string header_field(const std::string& header, const std::string& key) {
  const std::string needle = key + "=";
  const auto pos = header.find(needle);
  if (pos == std::string::npos) {
    throw std::runtime_error("dataset header missing field: " + key);
  }
  const auto start = pos + needle.size();
  auto end = header.find(' ', start);
  if (end == std::string::npos) end = header.size();
  return header.substr(start, end - start);
}

}  // namespace

JointDataset read_dataset_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::string header;
  if (!std::getline(f, header) || header.rfind("# ", 0) != 0) {
    throw std::runtime_error("bad dataset header in " + path);
  }
  JointDataset ds;
  ds.task_name = header_field(header, "task");
  ds.seed = std::stoull(header_field(header, "seed"));
  ds.stream_id = std::stoull(header_field(header, "stream"));
  ds.role = dataset_role_from_string(header_field(header, "role"));
  ds.theta_dim = std::stoi(header_field(header, "theta_dim"));
  ds.x_dim = std::stoi(header_field(header, "x_dim"));
  std::string line;
  std::getline(f, line);  // column names
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    int col = 0;
    while (std::getline(row, cell, ',')) {
      const double v = std::stod(cell);
      if (col < ds.theta_dim) {
        ds.thetas.push_back(v);
      } else {
        ds.xs.push_back(v);
      }
      ++col;
    }
    if (col != ds.theta_dim + ds.x_dim) {
      throw std::runtime_error("bad column count in " + path);
    }
  }
  return ds;
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  EVP_DigestUpdate(ctx, bytes.data(), bytes.size());
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

std::string dataset_fingerprint(const JointDataset& ds) {
  return sha256_hex(dataset_to_csv(ds));
}

}  // namespace canvi
