#pragma once

// Embedding provider with hand-chosen vectors, so similarity tests can pin
// exact cosines.

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ghostmark/metrics.hpp"

namespace ghostmark::testing {

class StubProvider final : public EmbeddingProvider {
 public:
  StubProvider(int dimension, std::map<std::string, std::vector<double>> table,
               std::optional<std::vector<double>> fallback = std::nullopt)
      : dimension_(dimension), table_(std::move(table)), fallback_(std::move(fallback)) {}

  const std::string& id() const override {
    static const std::string id = "stub";
    return id;
  }

  int dimension() const override { return dimension_; }

  std::vector<double> embed(std::string_view text) override {
    auto it = table_.find(std::string(text));
    if (it != table_.end()) return it->second;
    if (fallback_) return *fallback_;
    throw std::runtime_error("StubProvider: no vector registered for \"" +
                             std::string(text) + "\"");
  }

 private:
  int dimension_;
  std::map<std::string, std::vector<double>> table_;
  std::optional<std::vector<double>> fallback_;
};

}  // namespace ghostmark::testing
