#include "network_simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kacchain/error.hpp"

namespace kac {

namespace {
constexpr signed char kTree = 0, kLower = 1;
constexpr signed char kUp = 1, kDown = -1;
constexpr double kInf = std::numeric_limits<double>::infinity();
}  // namespace

NetworkSimplex::NetworkSimplex(const std::vector<double>& supply,
                               const std::vector<double>& demand, const std::vector<double>& cost)
    : na_(static_cast<int>(supply.size())),
      nb_(static_cast<int>(demand.size())),
      cost_in_(cost) {
  if (na_ < 1 || nb_ < 1) throw InvalidArgument("transport needs nonempty measures");
  if (cost.size() != static_cast<std::size_t>(na_) * nb_) {
    throw InvalidArgument("cost matrix has the wrong shape");
  }
  node_num_ = na_ + nb_;
  arc_num_ = na_ * nb_;
  all_arc_num_ = arc_num_ + node_num_;
  root_ = node_num_;
  const int n_all = node_num_ + 1;
  source_.resize(all_arc_num_);
  target_.resize(all_arc_num_);
  cost_.resize(all_arc_num_);
  flow_.assign(all_arc_num_, 0.0);
  state_.assign(all_arc_num_, kLower);
  supply_.resize(n_all);
  pi_.resize(n_all);
  parent_.resize(n_all);
  pred_.resize(n_all);
  thread_.resize(n_all);
  rev_thread_.resize(n_all);
  succ_num_.resize(n_all);
  last_succ_.resize(n_all);
  pred_dir_.resize(n_all);

  double max_cost = 0.0;
  for (int i = 0; i < na_; ++i) {
    for (int j = 0; j < nb_; ++j) {
      const int e = i * nb_ + j;
      source_[e] = i;
      target_[e] = na_ + j;
      cost_[e] = cost[e];
      if (!std::isfinite(cost[e]) || cost[e] < 0.0) {
        throw InvalidArgument("transport costs must be finite and nonnegative");
      }
      max_cost = std::max(max_cost, cost[e]);
    }
  }
  for (int i = 0; i < na_; ++i) supply_[i] = supply[i];
  for (int j = 0; j < nb_; ++j) supply_[na_ + j] = -demand[j];
  const double art_cost = (max_cost + 1.0) * node_num_;
  tol_ = 64.0 * std::numeric_limits<double>::epsilon() * art_cost;
  block_size_ = std::max(10, static_cast<int>(std::sqrt(static_cast<double>(arc_num_))));

  parent_[root_] = -1;
  pred_[root_] = -1;
  thread_[root_] = 0;
  rev_thread_[0] = root_;
  succ_num_[root_] = n_all;
  last_succ_[root_] = root_ - 1;
  supply_[root_] = 0.0;
  pi_[root_] = 0.0;
  for (int u = 0, e = arc_num_; u < node_num_; ++u, ++e) {
    parent_[u] = root_;
    pred_[u] = e;
    thread_[u] = u + 1;
    rev_thread_[u + 1] = u;
    succ_num_[u] = 1;
    last_succ_[u] = u;
    state_[e] = kTree;
    if (supply_[u] >= 0.0) {
      pred_dir_[u] = kUp;
      pi_[u] = 0.0;
      source_[e] = u;
      target_[e] = root_;
      flow_[e] = supply_[u];
      cost_[e] = 0.0;
    } else {
      pred_dir_[u] = kDown;
      pi_[u] = art_cost;
      source_[e] = root_;
      target_[e] = u;
      flow_[e] = -supply_[u];
      cost_[e] = art_cost;
    }
  }
}

bool NetworkSimplex::find_entering_arc() {
  double min = -tol_;
  int cnt = block_size_;
  int e;
  bool found = false;
  for (e = next_arc_; e != arc_num_; ++e) {
    const double c = state_[e] * (cost_[e] + pi_[source_[e]] - pi_[target_[e]]);
    if (c < min) {
      min = c;
      in_arc_ = e;
      found = true;
    }
    if (--cnt == 0) {
      if (found) {
        next_arc_ = e + 1 == arc_num_ ? 0 : e + 1;
        return true;
      }
      cnt = block_size_;
    }
  }
  for (e = 0; e != next_arc_; ++e) {
    const double c = state_[e] * (cost_[e] + pi_[source_[e]] - pi_[target_[e]]);
    if (c < min) {
      min = c;
      in_arc_ = e;
      found = true;
    }
    if (--cnt == 0) {
      if (found) {
        next_arc_ = e + 1;
        return true;
      }
      cnt = block_size_;
    }
  }
  if (!found) return false;
  next_arc_ = e == arc_num_ ? 0 : e;
  return true;
}

void NetworkSimplex::find_join_node() {
  int u = source_[in_arc_], v = target_[in_arc_];
  while (u != v) {
    if (succ_num_[u] < succ_num_[v]) {
      u = parent_[u];
    } else {
      v = parent_[v];
    }
  }
  join_ = u;
}

bool NetworkSimplex::find_leaving_arc() {
  // Entering arcs are always at their lower bound (no capacities).
  const int first = source_[in_arc_], second = target_[in_arc_];
  delta_ = kInf;
  int result = 0;
  for (int u = first; u != join_; u = parent_[u]) {
    const int e = pred_[u];
    const double d = pred_dir_[u] == kDown ? kInf : std::max(0.0, flow_[e]);
    if (d < delta_) {
      delta_ = d;
      u_out_ = u;
      result = 1;
    }
  }
  for (int u = second; u != join_; u = parent_[u]) {
    const int e = pred_[u];
    const double d = pred_dir_[u] == kUp ? kInf : std::max(0.0, flow_[e]);
    if (d <= delta_) {
      delta_ = d;
      u_out_ = u;
      result = 2;
    }
  }
  if (result == 1) {
    u_in_ = first;
    v_in_ = second;
  } else {
    u_in_ = second;
    v_in_ = first;
  }
  return result != 0;
}

void NetworkSimplex::change_flow() {
  if (delta_ > 0.0) {
    const double val = delta_;
    flow_[in_arc_] += val;
    for (int u = source_[in_arc_]; u != join_; u = parent_[u]) {
      flow_[pred_[u]] -= pred_dir_[u] * val;
    }
    for (int u = target_[in_arc_]; u != join_; u = parent_[u]) {
      flow_[pred_[u]] += pred_dir_[u] * val;
    }
  }
  state_[in_arc_] = kTree;
  flow_[pred_[u_out_]] = 0.0;
  state_[pred_[u_out_]] = kLower;
}

void NetworkSimplex::update_tree_structure() {
  const int old_rev_thread = rev_thread_[u_out_];
  const int old_succ_num = succ_num_[u_out_];
  const int old_last_succ = last_succ_[u_out_];
  v_out_ = parent_[u_out_];

  if (u_in_ == u_out_) {
    parent_[u_in_] = v_in_;
    pred_[u_in_] = in_arc_;
    pred_dir_[u_in_] = u_in_ == source_[in_arc_] ? kUp : kDown;
    if (thread_[v_in_] != u_out_) {
      int after = thread_[old_last_succ];
      thread_[old_rev_thread] = after;
      rev_thread_[after] = old_rev_thread;
      after = thread_[v_in_];
      thread_[v_in_] = u_out_;
      rev_thread_[u_out_] = v_in_;
      thread_[old_last_succ] = after;
      rev_thread_[after] = old_last_succ;
    }
  } else {
    const int thread_continue =
        old_rev_thread == v_in_ ? thread_[old_last_succ] : thread_[v_in_];
    int stem = u_in_;
    int par_stem = v_in_;
    int next_stem;
    int last = last_succ_[u_in_];
    int before, after = thread_[last];
    thread_[v_in_] = u_in_;
    dirty_revs_.clear();
    dirty_revs_.push_back(v_in_);
    while (stem != u_out_) {
      next_stem = parent_[stem];
      thread_[last] = next_stem;
      dirty_revs_.push_back(last);
      before = rev_thread_[stem];
      thread_[before] = after;
      rev_thread_[after] = before;
      parent_[stem] = par_stem;
      par_stem = stem;
      stem = next_stem;
      last = last_succ_[stem] == last_succ_[par_stem] ? rev_thread_[par_stem] : last_succ_[stem];
      after = thread_[last];
    }
    parent_[u_out_] = par_stem;
    thread_[last] = thread_continue;
    rev_thread_[thread_continue] = last;
    last_succ_[u_out_] = last;
    if (old_rev_thread != v_in_) {
      thread_[old_rev_thread] = after;
      rev_thread_[after] = old_rev_thread;
    }
    for (int u : dirty_revs_) rev_thread_[thread_[u]] = u;

    int tmp_sc = 0, tmp_ls = last_succ_[u_out_];
    for (int u = u_out_, p = parent_[u]; u != u_in_; u = p, p = parent_[u]) {
      pred_[u] = pred_[p];
      pred_dir_[u] = static_cast<signed char>(-pred_dir_[p]);
      tmp_sc += succ_num_[u] - succ_num_[p];
      succ_num_[u] = tmp_sc;
      last_succ_[p] = tmp_ls;
    }
    pred_[u_in_] = in_arc_;
    pred_dir_[u_in_] = u_in_ == source_[in_arc_] ? kUp : kDown;
    succ_num_[u_in_] = old_succ_num;
  }

  const int up_limit_out = last_succ_[join_] == v_in_ ? join_ : -1;
  const int last_succ_out = last_succ_[u_out_];
  for (int u = v_in_; u != -1 && last_succ_[u] == v_in_; u = parent_[u]) {
    last_succ_[u] = last_succ_out;
  }
  if (join_ != old_rev_thread && v_in_ != old_rev_thread) {
    for (int u = v_out_; u != up_limit_out && last_succ_[u] == old_last_succ; u = parent_[u]) {
      last_succ_[u] = old_rev_thread;
    }
  } else if (last_succ_out != old_last_succ) {
    for (int u = v_out_; u != up_limit_out && last_succ_[u] == old_last_succ; u = parent_[u]) {
      last_succ_[u] = last_succ_out;
    }
  }
  for (int u = v_in_; u != join_; u = parent_[u]) succ_num_[u] += old_succ_num;
  for (int u = v_out_; u != join_; u = parent_[u]) succ_num_[u] -= old_succ_num;
}

void NetworkSimplex::update_potential() {
  const double sigma = pi_[v_in_] - pi_[u_in_] - pred_dir_[u_in_] * cost_[in_arc_];
  const int end = thread_[last_succ_[u_in_]];
  for (int u = u_in_; u != end; u = thread_[u]) pi_[u] += sigma;
}

bool NetworkSimplex::run() {
  while (find_entering_arc()) {
    find_join_node();
    if (!find_leaving_arc()) throw NumericalError("transport LP is unbounded");
    change_flow();
    update_tree_structure();
    update_potential();
  }
  double scale = 0.0;
  for (int u = 0; u < node_num_; ++u) scale = std::max(scale, std::abs(supply_[u]));
  for (int e = arc_num_; e < all_arc_num_; ++e) {
    if (flow_[e] > 1e-9 * std::max(1.0, scale)) return false;
  }
  return true;
}

double NetworkSimplex::total_cost() const {
  double c = 0.0;
  for (int e = 0; e < arc_num_; ++e) {
    if (flow_[e] != 0.0) c += flow_[e] * cost_[e];
  }
  return c;
}

}  // namespace kac
