#pragma once

#include <bit>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <type_traits>
#include <utility>
#include <vector>

#include "nzp/errors.hpp"

namespace nzp {

// Pair carried by the segmented addition operator: a running sum plus the id
// of the segment it belongs to.
struct SegPair {
  std::int64_t sum = 0;
  std::int64_t segment = 0;

  friend bool operator==(const SegPair&, const SegPair&) = default;
};

// Segmented addition: accumulates within a segment, restarts at segment
// boundaries. Noncommutative but associative, so scans may combine operands
// in any tree shape as long as lower ranks stay on the left.
constexpr SegPair seg_op(SegPair a, SegPair b) {
  if (a.segment == b.segment) return {a.sum + b.sum, b.segment};
  return b;
}

// Per-rank traffic accounting. "rounds" counts communication rounds this
// rank took part in; collectives are charged by the cost model documented in
// the README (tree depth ceil(log2(size))), so the totals are a function of
// (rank, P) plus the collective sequence, never of wall-clock or scheduling.
struct Counters {
  std::uint64_t point_messages = 0;
  std::uint64_t point_scalars = 0;  // 8-byte words moved point-to-point
  std::uint64_t rounds = 0;
  std::uint64_t allreduces = 0;
  std::uint64_t reduced_scalars = 0;
  std::uint64_t group_creations = 0;
};

// Contiguous member range of a collective group, plus the harness site that
// mediates its collectives.
struct GroupHandle {
  int lo = 0;
  int hi = -1;  // inclusive
  int id = -1;

  int size() const { return hi - lo + 1; }
  bool contains(int rank) const { return rank >= lo && rank <= hi; }
};

struct RankRange {
  int lo = 0;
  int hi = 0;

  friend bool operator==(const RankRange&, const RankRange&) = default;
};

constexpr std::uint64_t ceil_log2(std::uint64_t v) {
  std::uint64_t r = 0;
  while ((std::uint64_t{1} << r) < v) ++r;
  return r;
}

namespace detail {

enum class OpKind : int { shift, allreduce, make_group };

struct OpTag {
  OpKind kind{};
  std::int64_t param = 0;     // shift offset / creation phase
  std::size_t payload = 0;    // per-member payload bytes

  friend bool operator==(const OpTag&, const OpTag&) = default;
};

// Rendezvous point for one group's collectives. Members deposit payloads,
// the last arrival computes the (deterministic) result, then everyone drains
// before the site can be reused.
struct Site {
  int lo = 0, hi = 0;
  bool filling = true;
  int arrived = 0;
  int left = 0;
  std::uint64_t generation = 0;
  OpTag tag{};
  std::vector<std::vector<std::byte>> deposits;
  std::vector<char> present;
  std::vector<std::byte> result;

  int count() const { return hi - lo + 1; }
};

}  // namespace detail

class Endpoint;

// In-process multi-rank harness: one thread per logical rank, blocking
// collectives, deterministic results. All cross-rank traffic goes through
// sites guarded by a single mutex; collective results are computed once, in
// a fixed order, by whichever member arrives last, so floating-point output
// is bit-identical across members and across runs.
class Harness {
 public:
  explicit Harness(int P) : P_(P), terminated_(static_cast<std::size_t>(P)) {
    sites_.push_back(std::make_unique<detail::Site>());
    sites_[0]->lo = 0;
    sites_[0]->hi = P - 1;
    sites_[0]->deposits.resize(static_cast<std::size_t>(P));
    sites_[0]->present.assign(static_cast<std::size_t>(P), 0);
  }

  Harness(const Harness&) = delete;
  Harness& operator=(const Harness&) = delete;

  int ranks() const { return P_; }

 private:
  friend class Endpoint;
  template <class F>
  friend auto run_ranks(int, F&&);

  static constexpr int kWorldSite = 0;

  // Runs one collective on a site: deposit, wait for completion, read.
  // `compute` runs exactly once per generation, under the lock, with all
  // deposits present. `read` extracts this rank's result while draining.
  void collective(int site_id, int rank, const detail::OpTag& tag,
                  std::vector<std::byte> payload,
                  const std::function<void(detail::Site&)>& compute,
                  const std::function<std::vector<std::byte>(detail::Site&)>&
                      read,
                  std::vector<std::byte>& out) {
    std::unique_lock lk(mu_);
    detail::Site& s = *sites_[static_cast<std::size_t>(site_id)];
    cv_.wait(lk, [&] { return aborted_ || s.filling; });
    throw_if_aborted();

    if (s.arrived == 0) {
      s.tag = tag;
    } else if (!(s.tag == tag)) {
      abort_locked("collective mismatch in group [" + std::to_string(s.lo) +
                   "," + std::to_string(s.hi) + "]: rank " +
                   std::to_string(rank) + " entered a different operation");
      throw_if_aborted();
    }
    const int slot = rank - s.lo;
    s.deposits[static_cast<std::size_t>(slot)] = std::move(payload);
    s.present[static_cast<std::size_t>(slot)] = 1;
    ++s.arrived;

    if (s.arrived == s.count()) {
      compute(s);
      s.filling = false;
      s.left = 0;
      ++s.generation;
      cv_.notify_all();
    } else {
      check_stuck_locked(s);
      const std::uint64_t gen = s.generation;
      cv_.wait(lk, [&] { return aborted_ || s.generation != gen; });
      throw_if_aborted();
    }

    out = read(s);
    ++s.left;
    if (s.left == s.count()) {
      s.filling = true;
      s.arrived = 0;
      for (auto& d : s.deposits) d.clear();
      std::fill(s.present.begin(), s.present.end(), 0);
      cv_.notify_all();
    }
  }

  // Registers a collective site for the member range [lo, hi]. Called under
  // the lock from a group-creation compute step.
  int register_site_locked(int lo, int hi) {
    auto site = std::make_unique<detail::Site>();
    site->lo = lo;
    site->hi = hi;
    site->deposits.resize(static_cast<std::size_t>(hi - lo + 1));
    site->present.assign(static_cast<std::size_t>(hi - lo + 1), 0);
    sites_.push_back(std::move(site));
    return static_cast<int>(sites_.size() - 1);
  }

  void mark_terminated(int rank) {
    std::lock_guard lk(mu_);
    terminated_[static_cast<std::size_t>(rank)] = 1;
    for (auto& site : sites_)
      if (site->filling && site->arrived > 0) check_stuck_locked(*site);
  }

  // Deadlock rule: a collective entered by a strict subset of its group
  // while every missing member has already terminated can never complete.
  void check_stuck_locked(detail::Site& s) {
    for (int r = s.lo; r <= s.hi; ++r)
      if (!s.present[static_cast<std::size_t>(r - s.lo)] &&
          !terminated_[static_cast<std::size_t>(r)])
        return;
    abort_locked("deadlock: collective in group [" + std::to_string(s.lo) +
                 "," + std::to_string(s.hi) +
                 "] entered by a strict subset; all other members terminated");
  }

  void abort_locked(const std::string& reason) {
    if (!aborted_) {
      aborted_ = true;
      abort_reason_ = reason;
    }
    cv_.notify_all();
  }

  void throw_if_aborted() {
    if (aborted_) throw harness_error(abort_reason_);
  }

  int P_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::vector<std::unique_ptr<detail::Site>> sites_;
  std::vector<char> terminated_;
  bool aborted_ = false;
  std::string abort_reason_;
};

namespace detail {

template <class T>
std::vector<std::byte> to_bytes(const T& v) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::vector<std::byte> out(sizeof(T));
  std::memcpy(out.data(), &v, sizeof(T));
  return out;
}

template <class T>
T from_bytes(const std::vector<std::byte>& b) {
  static_assert(std::is_trivially_copyable_v<T>);
  T v;
  std::memcpy(&v, b.data(), sizeof(T));
  return v;
}

constexpr std::int64_t kNoRange = INT64_MIN;

}  // namespace detail

// One rank's connection to the harness. Confined to that rank's thread.
class Endpoint {
 public:
  Endpoint(Harness& h, int rank) : h_(&h), rank_(rank) {}

  int rank() const { return rank_; }
  int size() const { return h_->ranks(); }
  const Counters& counters() const { return counters_; }

  GroupHandle world() const {
    return {0, h_->ranks() - 1, Harness::kWorldSite};
  }

  // One shift round: every rank sends `value` to rank + offset and receives
  // from rank - offset; ranks without a peer in either direction send or
  // receive nothing. Returns the received value, if any.
  template <class T>
  std::optional<T> shift_exchange(int offset, const T& value) {
    static_assert(std::is_trivially_copyable_v<T>);
    const bool sends = in_range(rank_ + offset);
    const bool receives = in_range(rank_ - offset);
    if (sends) {
      counters_.point_messages += 1;
      counters_.point_scalars += words(sizeof(T));
    }
    if (sends || receives) counters_.rounds += 1;

    detail::OpTag tag{detail::OpKind::shift, offset, sizeof(T)};
    std::vector<std::byte> out;
    h_->collective(
        Harness::kWorldSite, rank_, tag, detail::to_bytes(value),
        [](detail::Site&) {},
        [&](detail::Site& s) -> std::vector<std::byte> {
          if (!receives) return {};
          return s.deposits[static_cast<std::size_t>(rank_ - offset)];
        },
        out);
    if (!receives) return std::nullopt;
    return detail::from_bytes<T>(out);
  }

  // Paired boundary exchange: returns {from_left, from_right}; absent at the
  // respective end ranks. Two shift rounds.
  template <class T>
  std::pair<std::optional<T>, std::optional<T>> neighbor_exchange(
      const T& to_left, const T& to_right) {
    auto from_left = shift_exchange<T>(+1, to_right);
    auto from_right = shift_exchange<T>(-1, to_left);
    return {from_left, from_right};
  }

  // Element-wise sum over the group. Every member must pass the same
  // length. The reduction folds member buffers in a fixed rank-ascending
  // binary tree, so all members receive bit-identical results.
  std::vector<double> allreduce_sum(const GroupHandle& g,
                                    std::span<const double> buf) {
    counters_.allreduces += 1;
    counters_.reduced_scalars += buf.size();
    counters_.rounds += ceil_log2(static_cast<std::uint64_t>(g.size()));

    detail::OpTag tag{detail::OpKind::allreduce, 0,
                      buf.size() * sizeof(double)};
    std::vector<std::byte> payload(buf.size() * sizeof(double));
    std::memcpy(payload.data(), buf.data(), payload.size());
    std::vector<std::byte> out;
    h_->collective(
        g.id, rank_, tag, std::move(payload),
        [](detail::Site& s) {
          const std::size_t len = s.tag.payload / sizeof(double);
          const int count = s.count();
          std::vector<std::vector<double>> slots(
              static_cast<std::size_t>(count), std::vector<double>(len));
          for (int i = 0; i < count; ++i)
            std::memcpy(slots[static_cast<std::size_t>(i)].data(),
                        s.deposits[static_cast<std::size_t>(i)].data(),
                        s.tag.payload);
          for (int stride = 1; stride < count; stride *= 2)
            for (int i = 0; i + stride < count; i += 2 * stride)
              for (std::size_t k = 0; k < len; ++k)
                slots[static_cast<std::size_t>(i)][k] +=
                    slots[static_cast<std::size_t>(i + stride)][k];
          s.result.resize(s.tag.payload);
          std::memcpy(s.result.data(), slots[0].data(), s.tag.payload);
        },
        [](detail::Site& s) { return s.result; }, out);
    std::vector<double> result(buf.size());
    std::memcpy(result.data(), out.data(), out.size());
    return result;
  }

  // Inclusive forward scan: result at rank i is v_0 op v_1 op ... op v_i.
  // Hillis-Steele over shift rounds; op must be associative. ceil(log2 P)
  // rounds.
  template <class T, class Op>
  T scan_forward(T value, Op op) {
    T acc = value;
    for (int d = 1; d < size(); d <<= 1)
      if (auto got = shift_exchange<T>(d, acc)) acc = op(*got, acc);
    return acc;
  }

  // Inclusive backward scan: result at rank i is v_{P-1} op ... op v_i,
  // i.e. the forward scan of the reversed rank order.
  template <class T, class Op>
  T scan_backward(T value, Op op) {
    T acc = value;
    for (int d = 1; d < size(); d <<= 1)
      if (auto got = shift_exchange<T>(-d, acc)) acc = op(*got, acc);
    return acc;
  }

  // Creates all even-parity zone groups in one phase, then all odd-parity
  // groups in a second phase. Every rank participates in both phases,
  // passing its member range for that parity or nullopt. Same-parity ranges
  // are disjoint, so each phase materializes its groups simultaneously;
  // each phase is charged at the worst-case creation depth ceil(log2 P)
  // regardless of the actual group sizes, which keeps setup round counts a
  // function of P alone.
  std::pair<std::optional<GroupHandle>, std::optional<GroupHandle>>
  create_groups_two_phase(std::optional<RankRange> even_range,
                          std::optional<RankRange> odd_range) {
    return {create_phase(0, even_range), create_phase(1, odd_range)};
  }

 private:
  bool in_range(int r) const { return r >= 0 && r < size(); }
  static std::uint64_t words(std::size_t bytes) { return (bytes + 7) / 8; }

  std::optional<GroupHandle> create_phase(int phase,
                                          std::optional<RankRange> range) {
    counters_.rounds += ceil_log2(static_cast<std::uint64_t>(size()));
    if (range) counters_.group_creations += 1;

    struct Claim {
      std::int64_t lo;
      std::int64_t hi;
    };
    Claim claim{detail::kNoRange, detail::kNoRange};
    if (range) claim = {range->lo, range->hi};

    detail::OpTag tag{detail::OpKind::make_group, phase, sizeof(Claim)};
    std::vector<std::byte> out;
    Harness& h = *h_;
    h.collective(
        Harness::kWorldSite, rank_, tag, detail::to_bytes(claim),
        [&h](detail::Site& s) {
          const int P = s.count();
          std::vector<Claim> claims(static_cast<std::size_t>(P));
          for (int i = 0; i < P; ++i)
            claims[static_cast<std::size_t>(i)] =
                detail::from_bytes<Claim>(s.deposits[static_cast<std::size_t>(i)]);
          std::vector<std::int64_t> ids(static_cast<std::size_t>(P), -1);
          int r = 0;
          while (r < P) {
            const Claim c = claims[static_cast<std::size_t>(r)];
            if (c.lo == detail::kNoRange) {
              ++r;
              continue;
            }
            // Every member of the claimed range must claim exactly it.
            if (c.lo != r || c.hi < c.lo || c.hi >= P) {
              s.result.clear();
              throw harness_error(
                  "group creation: rank " + std::to_string(r) +
                  " claimed inconsistent range [" + std::to_string(c.lo) +
                  "," + std::to_string(c.hi) + "]");
            }
            for (std::int64_t i = c.lo; i <= c.hi; ++i) {
              const Claim ci = claims[static_cast<std::size_t>(i)];
              if (ci.lo != c.lo || ci.hi != c.hi)
                throw harness_error(
                    "group creation: members of [" + std::to_string(c.lo) +
                    "," + std::to_string(c.hi) + "] disagree at rank " +
                    std::to_string(i));
            }
            const int id = h.register_site_locked(static_cast<int>(c.lo),
                                                  static_cast<int>(c.hi));
            for (std::int64_t i = c.lo; i <= c.hi; ++i)
              ids[static_cast<std::size_t>(i)] = id;
            r = static_cast<int>(c.hi) + 1;
          }
          s.result.resize(static_cast<std::size_t>(P) * sizeof(std::int64_t));
          std::memcpy(s.result.data(), ids.data(), s.result.size());
        },
        [&](detail::Site& s) -> std::vector<std::byte> {
          std::vector<std::byte> mine(sizeof(std::int64_t));
          std::memcpy(mine.data(),
                      s.result.data() +
                          static_cast<std::size_t>(rank_) *
                              sizeof(std::int64_t),
                      sizeof(std::int64_t));
          return mine;
        },
        out);
    if (!range) return std::nullopt;
    const auto id = detail::from_bytes<std::int64_t>(out);
    return GroupHandle{range->lo, range->hi, static_cast<int>(id)};
  }

  Harness* h_;
  int rank_;
  Counters counters_;
};

// Executes `program(endpoint)` once per rank on its own thread and returns
// the per-rank results in rank order. Results are independent of thread
// scheduling; a failing rank's exception is rethrown (lowest rank first),
// with harness deadlock errors reported only when no rank failed on its own.
template <class F>
auto run_ranks(int P, F&& program) {
  using R = std::invoke_result_t<F&, Endpoint&>;
  if (P < 1) throw input_error("rank count must be >= 1");

  Harness harness(P);
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(P));
  std::vector<R> results(static_cast<std::size_t>(P));
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(P));
  for (int r = 0; r < P; ++r) {
    threads.emplace_back([&, r] {
      Endpoint ep(harness, r);
      try {
        results[static_cast<std::size_t>(r)] = program(ep);
      } catch (...) {
        errors[static_cast<std::size_t>(r)] = std::current_exception();
      }
      harness.mark_terminated(r);
    });
  }
  for (auto& t : threads) t.join();

  // Prefer the root cause: a rank's own failure over the secondary aborts
  // it caused in other ranks.
  std::exception_ptr harness_failure;
  for (int r = 0; r < P; ++r) {
    if (!errors[static_cast<std::size_t>(r)]) continue;
    try {
      std::rethrow_exception(errors[static_cast<std::size_t>(r)]);
    } catch (const harness_error&) {
      if (!harness_failure) harness_failure = errors[static_cast<std::size_t>(r)];
    } catch (...) {
      std::rethrow_exception(errors[static_cast<std::size_t>(r)]);
    }
  }
  if (harness_failure) std::rethrow_exception(harness_failure);
  return results;
}

}  // namespace nzp
