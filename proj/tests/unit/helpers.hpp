#pragma once

#include <memory>
#include <string>
#include <vector>

#include "maestro/backends.hpp"
#include "maestro/cost.hpp"
#include "maestro/embedding.hpp"
#include "maestro/matrix.hpp"
#include "maestro/rng.hpp"

namespace maestro::testing {

inline std::shared_ptr<MockScript> fixed_script(std::string text, std::vector<double> logprobs = {-0.1}) {
  auto s = std::make_shared<MockScript>();
  s->fallback = {"", std::move(text), std::move(logprobs), MockBehavior::Fixed, 0.0};
  return s;
}

inline BackendSpec mock_spec(const std::string& model, std::shared_ptr<const MockScript> script,
                             double latency_per_token = 0.0) {
  BackendSpec b;
  b.model = ModelId{model};
  b.price = PriceTable::defaults().at(b.model);
  b.script = std::move(script);
  b.script_name = "test";
  b.latency_per_token = latency_per_token;
  return b;
}

// Cheap 7B and large 70B mocks that both answer "4".
inline std::vector<BackendSpec> two_mocks(const std::string& text = "Thinking.\nAnswer: 4") {
  return {mock_spec("Qwen2.5-7B", fixed_script(text)), mock_spec("Llama3.1-70B", fixed_script(text))};
}

inline Embedding random_unit(std::size_t d, Rng& rng) {
  std::vector<double> v(d);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return normalized(std::move(v));
}

inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
}

}  // namespace maestro::testing
