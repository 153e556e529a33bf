#include "b3d/io.hpp"

#include <sodium.h>

#include <fstream>
#include <iterator>
#include <system_error>

#include "b3d/error.hpp"

namespace b3d {

namespace fs = std::filesystem;

Bytes read_file(const fs::path& path) {
  std::error_code ec;
  require(fs::is_regular_file(path, ec), ErrorKind::kMissingFile,
          "no such file: " + path.string());
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::kIo,
          "cannot open for reading: " + path.string());
  Bytes bytes((std::istreambuf_iterator<char>(in)),
              std::istreambuf_iterator<char>());
  require(!in.bad(), ErrorKind::kIo, "read failed: " + path.string());
  return bytes;
}

std::string read_text(const fs::path& path) {
  const Bytes bytes = read_file(path);
  return std::string(bytes.begin(), bytes.end());
}

void write_file_atomic(const fs::path& path, std::span<const std::uint8_t> bytes) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorKind::kIo,
            "cannot open for writing: " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      out.close();
      std::error_code ignored;
      fs::remove(tmp, ignored);
      fail(ErrorKind::kIo, "write failed: " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    std::error_code ignored;
    fs::remove(tmp, ignored);
    fail(ErrorKind::kIo, "cannot move " + tmp.string() + " into place: " +
                             ec.message());
  }
}

void write_text_atomic(const fs::path& path, std::string_view text) {
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()),
                                    text.size()));
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  constexpr int kVariant = sodium_base64_VARIANT_ORIGINAL;
  std::string out(sodium_base64_encoded_len(bytes.size(), kVariant), '\0');
  sodium_bin2base64(out.data(), out.size(), bytes.data(), bytes.size(), kVariant);
  out.resize(out.size() - 1);  // trailing NUL
  return out;
}

Bytes base64_decode(std::string_view text) {
  Bytes out(text.size() / 4 * 3 + 3);
  std::size_t len = 0;
  const int rc = sodium_base642bin(out.data(), out.size(), text.data(), text.size(),
                                   " \r\n", &len, nullptr,
                                   sodium_base64_VARIANT_ORIGINAL);
  require(rc == 0, ErrorKind::kMalformed, "invalid base64 payload");
  out.resize(len);
  return out;
}

}  // namespace b3d
