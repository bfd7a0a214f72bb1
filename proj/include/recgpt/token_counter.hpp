#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <string_view>

namespace recgpt {

// Measures text in model tokens. Implementations must satisfy
// count("") == 0 and count(a + b) >= max(count(a), count(b)), and be safe
// to call concurrently.
class TokenCounter {
 public:
  virtual ~TokenCounter() = default;
  virtual std::string id() const = 0;
  virtual std::size_t count(std::string_view text) const = 0;
};

// Reference counter: ceil(bytes / 4).
class ByteQuarterCounter final : public TokenCounter {
 public:
  std::string id() const override { return "bytes/4"; }
  std::size_t count(std::string_view text) const override { return (text.size() + 3) / 4; }
};

// Adapts any callable; used to plug in a real tokenizer.
class FunctionCounter final : public TokenCounter {
 public:
  FunctionCounter(std::string id, std::function<std::size_t(std::string_view)> fn)
      : id_(std::move(id)), fn_(std::move(fn)) {}
  std::string id() const override { return id_; }
  std::size_t count(std::string_view text) const override { return fn_(text); }

 private:
  std::string id_;
  std::function<std::size_t(std::string_view)> fn_;
};

}  // namespace recgpt
