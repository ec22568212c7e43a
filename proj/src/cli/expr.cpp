#include "sck/cli/config.hpp"

#include <boost/math/constants/constants.hpp>

#include <cctype>
#include <charconv>
#include <cmath>
#include <stdexcept>

namespace sck::cli {

namespace {

class ExprParser {
 public:
  explicit ExprParser(std::string_view text) : s_(text) {}

  double parse() {
    skip();
    bool negate = false;
    if (peek() == '-') {
      ++pos_;
      negate = true;
    }
    double v = term();
    skip();
    if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    return negate ? -v : v;
  }

 private:
  double term() {
    double v = power();
    while (skip(), peek() == '*') {
      ++pos_;
      v *= power();
    }
    return v;
  }

  double power() {
    const double base = atom();
    skip();
    if (peek() == '^') {
      ++pos_;
      return std::pow(base, power());
    }
    return base;
  }

  double atom() {
    skip();
    if (s_.substr(pos_, 2) == "pi") {
      pos_ += 2;
      return boost::math::constants::pi<double>();
    }
    double v = 0.0;
    const char* first = s_.data() + pos_;
    if (peek() == '-' || peek() == '+') fail("a sign is only allowed at the start");
    const auto [ptr, ec] = std::from_chars(first, s_.data() + s_.size(), v);
    if (ec != std::errc() || ptr == first) fail("expected a number or 'pi'");
    pos_ += static_cast<std::size_t>(ptr - first);
    return v;
  }

  char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }
  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  [[noreturn]] void fail(const std::string& why) const {
    throw std::invalid_argument(why + " at offset " + std::to_string(pos_) + " in \"" + std::string(s_) + "\"");
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace

double parse_real_expr(std::string_view text) {
  const double v = ExprParser(text).parse();
  if (!std::isfinite(v)) throw std::invalid_argument("\"" + std::string(text) + "\" is not finite");
  return v;
}

}  // namespace sck::cli
