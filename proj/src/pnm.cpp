#include <cctype>
#include <limits>
#include <string>

#include "protopipe/error.hpp"
#include "protopipe/frame.hpp"

namespace protopipe {

Frame::Frame(int w, int h, int c, std::uint8_t fill)
    : width(w), height(h), channels(c),
      pixels(static_cast<std::size_t>(w) * h * c, fill) {}

Frame::Frame(int w, int h, int c, std::vector<std::uint8_t> data)
    : width(w), height(h), channels(c), pixels(std::move(data)) {
  if (pixels.size() != static_cast<std::size_t>(w) * h * c) {
    throw Error(ErrorCode::kDimensionMismatch, "frame pixel count does not match dimensions");
  }
}

namespace {

class HeaderReader {
 public:
  explicit HeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void skip_whitespace_and_comments() {
    while (pos_ < bytes_.size()) {
      const auto ch = bytes_[pos_];
      if (ch == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(ch)) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  long read_number(const char* what) {
    skip_whitespace_and_comments();
    long value = 0;
    std::size_t digits = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > std::numeric_limits<int>::max()) {
        throw Error(ErrorCode::kMalformedHeader, std::string(what) + " out of range");
      }
      ++pos_;
      ++digits;
    }
    if (digits == 0) throw Error(ErrorCode::kMalformedHeader, std::string("missing ") + what);
    return value;
  }

  // Exactly one whitespace byte separates maxval from the payload.
  void expect_single_whitespace() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
      throw Error(ErrorCode::kMalformedHeader, "missing whitespace after maxval");
    }
    ++pos_;
  }

  std::size_t pos() const { return pos_; }
  void advance(std::size_t n) { pos_ += n; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

Frame decode_pnm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw Error(ErrorCode::kMalformedHeader, "expected magic P5 or P6");
  }
  const int channels = bytes[1] == '5' ? 1 : 3;
  HeaderReader reader(bytes);
  reader.advance(2);
  if (reader.pos() >= bytes.size() || !std::isspace(bytes[reader.pos()])) {
    throw Error(ErrorCode::kMalformedHeader, "missing whitespace after magic");
  }
  const long width = reader.read_number("width");
  const long height = reader.read_number("height");
  const long maxval = reader.read_number("maxval");
  if (width <= 0 || height <= 0) throw Error(ErrorCode::kMalformedHeader, "zero dimension");
  if (maxval != 255) {
    throw Error(ErrorCode::kUnsupportedMaxval, "maxval " + std::to_string(maxval));
  }
  reader.expect_single_whitespace();

  const std::size_t payload = static_cast<std::size_t>(width) * height * channels;
  if (bytes.size() - reader.pos() < payload) {
    throw Error(ErrorCode::kTruncatedPayload, "expected " + std::to_string(payload) +
                                                  " payload bytes, found " +
                                                  std::to_string(bytes.size() - reader.pos()));
  }
  auto first = bytes.begin() + static_cast<std::ptrdiff_t>(reader.pos());
  return Frame(static_cast<int>(width), static_cast<int>(height), channels,
               std::vector<std::uint8_t>(first, first + static_cast<std::ptrdiff_t>(payload)));
}

Bytes encode_pnm(const Frame& frame) {
  if (frame.channels != 1 && frame.channels != 3) {
    throw Error(ErrorCode::kUnsupportedChannels, std::to_string(frame.channels) + " channels");
  }
  const std::string header = std::string(frame.channels == 1 ? "P5" : "P6") + "\n" +
                             std::to_string(frame.width) + " " + std::to_string(frame.height) +
                             "\n255\n";
  Bytes out(header.begin(), header.end());
  out.insert(out.end(), frame.pixels.begin(), frame.pixels.end());
  return out;
}

}  // namespace protopipe
