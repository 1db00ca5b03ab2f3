#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "core/image.hpp"

namespace facebb {

struct InputDims {
  int height = 0;
  int width = 0;
  int channels = 0;
  friend bool operator==(const InputDims&, const InputDims&) = default;
};

std::string to_string(const InputDims& dims);

// Unit-l2 feature vector. Construction normalizes; the stored norm is 1
// within 1e-6 by contract.
class Embedding {
 public:
  Embedding() = default;
  static Embedding normalized(std::vector<double> values);

  std::size_t dim() const noexcept { return values_.size(); }
  const std::vector<double>& values() const noexcept { return values_; }

  friend bool operator==(const Embedding&, const Embedding&) = default;

 private:
  explicit Embedding(std::vector<double> v) : values_(std::move(v)) {}
  std::vector<double> values_;
};

double feature_distance(const Embedding& a, const Embedding& b);

// Oracle calls charged to one attack. Never decreases.
class QueryLedger {
 public:
  std::int64_t count() const noexcept { return count_; }
  void charge() noexcept { ++count_; }

 private:
  std::int64_t count_ = 0;
};

class Oracle {
 public:
  virtual ~Oracle() = default;

  virtual InputDims input_dims() const = 0;
  virtual int embed_dim() const = 0;
  virtual bool concurrency_safe() const = 0;

  // Charged embed: counts against the caller's ledger.
  Embedding embed(const Image& img, QueryLedger& ledger);
  // Logged but uncharged (cached source embeddings, threshold scoring).
  Embedding embed_uncharged(const Image& img);

  std::uint64_t total_calls() const noexcept { return total_calls_.load(); }

 protected:
  virtual Embedding compute(const Image& img) = 0;

 private:
  Embedding checked_compute(const Image& img);
  std::atomic<std::uint64_t> total_calls_{0};
};

struct VerifierConfig {
  double d_b = 1.14;
  void validate() const;
};

struct Verification {
  bool match = false;
  double distance = 0.0;
};

// MATCH iff feature distance < d_b. Embeds are uncharged.
Verification verify(Oracle& oracle, const FacePair& pair, const VerifierConfig& cfg);

// ---------------------------------------------------------------------------
// Toy backend: e = normalize(tanh(W x + b)), W (D x N) and b (D) drawn from
// LcgNormalStream(seed), row-major W first then b, all scaled by 1/sqrt(N).

struct ToyEmbedderSpec {
  std::uint64_t seed = 7;
  InputDims input{8, 8, 3};
  int embed_dim = 128;
};

// Straight-line evaluation that regenerates the weights on every call.
Embedding toy_embed_formula(const ToyEmbedderSpec& spec, const Image& img);

class ToyOracle final : public Oracle {
 public:
  explicit ToyOracle(const ToyEmbedderSpec& spec);

  InputDims input_dims() const override { return spec_.input; }
  int embed_dim() const override { return spec_.embed_dim; }
  bool concurrency_safe() const override { return true; }
  const ToyEmbedderSpec& spec() const noexcept { return spec_; }

 protected:
  Embedding compute(const Image& img) override;

 private:
  ToyEmbedderSpec spec_;
  std::vector<double> weights_t_;  // N x D (transposed for the accumulation loop)
  std::vector<double> bias_;
};

// ---------------------------------------------------------------------------
// Wire-protocol backend: newline-delimited JSON over TCP or a child
// process's stdio. Endpoints: "tcp://host:port" or "stdio:<shell command>".

class Transport {
 public:
  virtual ~Transport() = default;
  virtual void write_line(const std::string& line) = 0;
  // Returns the next line without its terminator. Throws on timeout or EOF.
  virtual std::string read_line(std::chrono::milliseconds timeout) = 0;
};

std::unique_ptr<Transport> open_transport(const std::string& endpoint);

class WireOracle final : public Oracle {
 public:
  explicit WireOracle(std::unique_ptr<Transport> transport,
                      std::chrono::milliseconds timeout = std::chrono::seconds(30));
  static std::unique_ptr<WireOracle> connect(
      const std::string& endpoint, std::chrono::milliseconds timeout = std::chrono::seconds(30));

  InputDims input_dims() const override { return input_; }
  int embed_dim() const override { return embed_dim_; }
  bool concurrency_safe() const override { return false; }

 protected:
  Embedding compute(const Image& img) override;

 private:
  std::unique_ptr<Transport> transport_;
  std::chrono::milliseconds timeout_;
  InputDims input_;
  int embed_dim_ = 0;
  std::uint64_t next_id_ = 1;
};

// Builds a wire embed request; exposed for protocol tests.
std::string encode_embed_request(std::uint64_t id, const Image& img);

}  // namespace facebb
