#include <atomic>
#include <chrono>
#include <cmath>
#include <mutex>
#include <thread>

#include "httplib.h"
#include <nlohmann/json.hpp>

#include "ipursuit/answers.hpp"

namespace ipursuit {

struct NliClient::Impl {
  NliClientConfig config;
};

NliClient::NliClient(NliClientConfig config) : impl_(std::make_unique<Impl>()) {
  if (config.base_url.empty()) throw ValidationError("nli client: empty base url");
  if (config.max_attempts < 1) throw ValidationError("nli client: max_attempts must be >= 1");
  if (config.fan_out < 1) throw ValidationError("nli client: fan_out must be >= 1");
  impl_->config = std::move(config);
}

NliClient::~NliClient() = default;
NliClient::NliClient(NliClient&&) noexcept = default;
NliClient& NliClient::operator=(NliClient&&) noexcept = default;

const NliClientConfig& NliClient::config() const { return impl_->config; }

int NliClient::infer(const NliPrompt& prompt) const {
  const NliClientConfig& cfg = impl_->config;
  const nlohmann::json body = {{"instruction", prompt.instruction},
                               {"premise", prompt.premise},
                               {"hypothesis", prompt.hypothesis}};
  const std::string payload = body.dump();

  std::string last_error;
  for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    if (attempt > 0) {
      const double delay_ms = cfg.backoff_initial_ms * std::pow(2.0, attempt - 1);
      std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(delay_ms));
    }
    httplib::Client client(cfg.base_url);
    const auto timeout = std::chrono::duration<double>(cfg.timeout_seconds);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);

    httplib::Result res = client.Post("/infer", payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "http status " + std::to_string(res->status);
      continue;
    }
    try {
      const nlohmann::json reply = nlohmann::json::parse(res->body);
      return reply.at("label").get<int>();
    } catch (const nlohmann::json::exception& e) {
      last_error = std::string("bad response body: ") + e.what();
      continue;
    }
  }
  throw ServiceError("nli service at " + cfg.base_url + " failed after " +
                     std::to_string(cfg.max_attempts) + " attempts: " + last_error);
}

Answer NliClient::answer(const NliPrompt& prompt) const { return map_nli_output(infer(prompt)); }

std::vector<Answer> NliClient::answer_batch(const std::vector<NliPrompt>& prompts) const {
  std::vector<Answer> out(prompts.size(), kAnswerUnknown);
  const std::size_t workers = std::min<std::size_t>(impl_->config.fan_out, prompts.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < prompts.size(); ++i) out[i] = answer(prompts[i]);
    return out;
  }
  // Fan-out bounds in-flight requests; each request gets its own connection.
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= prompts.size() || failed.load()) return;
        try {
          out[i] = answer(prompts[i]);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!failed.exchange(true)) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
  return out;
}

}  // namespace ipursuit
