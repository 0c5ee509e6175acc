// Shared plumbing: error type, seed derivation, number formatting and a
// small deterministic parallel-for.

#ifndef METAMIML_COMMON_H_
#define METAMIML_COMMON_H_

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace metamiml {

using NodeId = std::uint32_t;
using TypeId = std::uint32_t;
using RelationId = std::uint32_t;
using LabelIndex = std::uint32_t;

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Rng = std::mt19937_64;

// Category of a failure. The CLI maps these onto its exit codes.
enum class ErrorKind {
  kInvalidArgument,
  kConfig,
  kData,
  kDivergence,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void Fail(ErrorKind kind, const std::string& message);

// 64-bit finalizer from splitmix64.
std::uint64_t Mix64(std::uint64_t x);

// FNV-1a over bytes.
std::uint64_t Fnv1a64(std::string_view bytes,
                      std::uint64_t basis = 0xcbf29ce484222325ULL);

// Independent stream seed for (seed, a, b). Used so that parallel work items
// draw from streams that do not depend on scheduling.
std::uint64_t DeriveSeed(std::uint64_t seed, std::uint64_t a,
                         std::uint64_t b = 0);

// Seed for a named pipeline stage: Mix64(master ^ Fnv1a64(stage)).
std::uint64_t StageSeed(std::uint64_t master, std::string_view stage);

// Shortest decimal form that parses back to the identical double.
std::string FormatDouble(double value);
// Fixed four-decimal form used in reports.
std::string FormatFixed4(double value);

// Strict parsers: the whole token must be consumed.
bool ParseDouble(std::string_view token, double* out);
bool ParseUint64(std::string_view token, std::uint64_t* out);
bool ParseInt64(std::string_view token, std::int64_t* out);

std::string HexU64(std::uint64_t value);

// Runs fn(i) for i in [0, n). Work is split over at most `threads` workers;
// callers write results into slot i so the outcome is schedule independent.
void ParallelFor(std::size_t n, int threads,
                 const std::function<void(std::size_t)>& fn);

// Number of hardware threads, at least 1.
int DefaultThreads();

}  // namespace metamiml

#endif  // METAMIML_COMMON_H_
