#pragma once

#include <Eigen/Dense>
#include <vector>

namespace hwctrl {

/// An activity (class i served at pool j), 0-based.
struct Edge {
  int cls = 0;
  int pool = 0;

  friend auto operator<=>(const Edge&, const Edge&) = default;
};

enum class NodeKind { Class, Pool };

/// A vertex of the bipartite tree. `index` is 1-based, as in every external format.
struct NodeId {
  NodeKind kind = NodeKind::Class;
  int index = 1;

  friend bool operator==(const NodeId&, const NodeId&) = default;
};

/// Unvalidated network description, as read from a spec file (1-based edge labels).
struct NetworkSpec {
  struct ClassParams {
    double lambda = 0.0;
    double lambda_hat = 0.0;
    double gamma = 0.0;
  };
  struct EdgeParams {
    int cls = 0;   // 1-based
    int pool = 0;  // 1-based
    double mu = 0.0;
    double mu_hat = 0.0;
  };
  std::vector<ClassParams> classes;
  std::vector<double> nu;
  std::vector<EdgeParams> edges;
};

/// Multiclass multi-pool network on a bipartite tree with Halfin-Whitt parameters.
/// Immutable once built by validate_network().
struct Network {
  int I = 0;
  int J = 0;
  std::vector<Edge> edges;  // sorted by (class, pool)

  Eigen::VectorXd lambda;
  Eigen::VectorXd lambda_hat;
  Eigen::VectorXd gamma;
  Eigen::VectorXd nu;
  Eigen::MatrixXd mu;      // I x J, zero off edges
  Eigen::MatrixXd mu_hat;  // I x J, zero off edges

  int num_edges() const { return static_cast<int>(edges.size()); }
  bool has_edge(int i, int j) const { return mu(i, j) > 0.0; }
  bool has_abandonment() const { return (gamma.array() > 0.0).any(); }

  /// Pools adjacent to class i, ascending.
  std::vector<int> pools_of(int i) const;
  /// Classes adjacent to pool j, ascending.
  std::vector<int> classes_of(int j) const;
};

Network validate_network(const NetworkSpec& spec);

struct LeafSet {
  std::vector<NodeId> classes;
  std::vector<NodeId> pools;
};

/// Degree-1 vertices of the tree, split by side.
LeafSet leaves(const Network& net);

/// Number of vertices reached by breadth-first search from class 0.
int reachable_nodes(const Network& net);

}  // namespace hwctrl
