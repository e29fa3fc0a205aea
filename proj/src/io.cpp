#include "quenched/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace quenched::cli {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

namespace {

void dump_to(const Json& v, std::string& out, int indent) {
  const std::string pad(static_cast<std::size_t>(indent + 2), ' ');
  const std::string close(static_cast<std::size_t>(indent), ' ');
  switch (v.type()) {
    case Json::value_t::object: {
      if (v.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (const auto& [key, item] : v.items()) {
        if (!first) out += ",\n";
        first = false;
        out += pad + Json(key).dump() + ": ";
        dump_to(item, out, indent + 2);
      }
      out += "\n" + close + "}";
      return;
    }
    case Json::value_t::array: {
      if (v.empty()) {
        out += "[]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (i > 0) out += ",\n";
        out += pad;
        dump_to(v[i], out, indent + 2);
      }
      out += "\n" + close + "]";
      return;
    }
    case Json::value_t::number_float: {
      const double d = v.get<double>();
      out += std::isfinite(d) ? format_double(d) : "\"" + format_double(d) + "\"";
      return;
    }
    default:
      out += v.dump();
  }
}

}  // namespace

std::string dump(const Json& value) {
  std::string out;
  dump_to(value, out, 0);
  out += "\n";
  return out;
}

Csv::Csv(std::initializer_list<std::string_view> columns) : columns_(columns.size()) {
  bool first = true;
  for (std::string_view c : columns) {
    if (!first) text_ += ',';
    first = false;
    text_ += c;
  }
  text_ += '\n';
}

Csv& Csv::cell(std::string_view v) {
  if (filled_ > 0) text_ += ',';
  text_ += v;
  ++filled_;
  return *this;
}

Csv& Csv::cell(double v) { return cell(std::string_view(format_double(v))); }
Csv& Csv::cell(std::int64_t v) { return cell(std::string_view(std::to_string(v))); }
Csv& Csv::cell(std::uint64_t v) { return cell(std::string_view(std::to_string(v))); }

void Csv::end_row() {
  if (filled_ != columns_)
    throw std::logic_error("csv row has " + std::to_string(filled_) + " cells, expected " + std::to_string(columns_));
  text_ += '\n';
  filled_ = 0;
}

OutputDir::OutputDir(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec || !std::filesystem::is_directory(dir_))
    throw IoError("cannot create output directory '" + dir_.string() + "'");
}

void OutputDir::write(const std::string& name, std::string_view content) {
  const std::filesystem::path target = dir_ / name;
  std::ofstream out(target, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + target.string() + "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.close();
  if (!out) throw IoError("failed writing '" + target.string() + "'");
  files_.push_back({name, content.size(), hex64(fnv1a(content))});
}

}  // namespace quenched::cli
