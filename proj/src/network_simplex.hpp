#pragma once

#include <vector>

namespace kac {

// Primal network simplex for the uncapacitated transportation problem on the
// complete bipartite graph (na sources, nb sinks) with a dense cost matrix.
// Spanning-tree bookkeeping follows the thread/successor representation with
// block-search pivoting and an artificial root.
class NetworkSimplex {
 public:
  NetworkSimplex(const std::vector<double>& supply, const std::vector<double>& demand,
                 const std::vector<double>& cost);

  // Returns false if artificial arcs keep flow (infeasible instance).
  bool run();
  double total_cost() const;
  double flow(int arc) const { return flow_[arc]; }
  int sources() const { return na_; }
  int sinks() const { return nb_; }

 private:
  bool find_entering_arc();
  void find_join_node();
  bool find_leaving_arc();
  void change_flow();
  void update_tree_structure();
  void update_potential();

  int na_, nb_, node_num_, arc_num_, all_arc_num_, root_;
  const std::vector<double>& cost_in_;
  std::vector<int> source_, target_;
  std::vector<double> cost_, flow_;
  std::vector<signed char> state_;
  std::vector<double> supply_, pi_;
  std::vector<int> parent_, pred_, thread_, rev_thread_, succ_num_, last_succ_;
  std::vector<signed char> pred_dir_;
  std::vector<int> dirty_revs_;
  int block_size_, next_arc_ = 0;
  double tol_;
  int in_arc_ = -1, join_ = -1, u_in_ = -1, v_in_ = -1, u_out_ = -1, v_out_ = -1;
  double delta_ = 0.0;
};

}  // namespace kac
