#include "io.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "errors.hpp"

namespace kflow {

namespace fs = std::filesystem;

namespace {

void rename_over(const std::string& tmp, const std::string& path) {
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw io_error("rename failed for " + path + ": " + ec.message());
    }
}

}  // namespace

void write_file_atomic(const std::string& path, const std::string& contents) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw io_error("cannot open " + tmp + " for writing");
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        out.flush();
        if (!out) throw io_error("short write to " + tmp);
    }
    rename_over(tmp, path);
}

void write_binary_atomic(const std::string& path, const void* data, std::size_t bytes) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw io_error("cannot open " + tmp + " for writing");
        out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
        out.flush();
        if (!out) throw io_error("short write to " + tmp);
    }
    rename_over(tmp, path);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path);
    std::string contents((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw io_error("read failed for " + path);
    return contents;
}

std::vector<double> read_doubles(const std::string& path) {
    const std::string raw = read_file(path);
    if (raw.size() % sizeof(double) != 0)
        throw io_error(path + ": size is not a multiple of 8 bytes");
    std::vector<double> out(raw.size() / sizeof(double));
    std::memcpy(out.data(), raw.data(), raw.size());
    return out;
}

std::string fmt_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_csv(const std::string& path, const std::string& header,
               const std::vector<std::vector<double>>& rows) {
    std::string body;
    body.reserve(rows.size() * 32 + header.size() + 2);
    body += header;
    body += '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) body += ',';
            body += fmt_g17(row[i]);
        }
        body += '\n';
    }
    write_file_atomic(path, body);
}

void ensure_directory(const std::string& path) {
    std::error_code ec;
    fs::create_directories(path, ec);
    if (ec) throw io_error("cannot create directory " + path + ": " + ec.message());
}

}  // namespace kflow
