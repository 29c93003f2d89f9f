#include "hwctrl/network.hpp"

#include <algorithm>
#include <queue>
#include <set>
#include <string>

#include "hwctrl/error.hpp"

namespace hwctrl {

std::vector<int> Network::pools_of(int i) const {
  std::vector<int> out;
  for (const Edge& e : edges)
    if (e.cls == i) out.push_back(e.pool);
  return out;
}

std::vector<int> Network::classes_of(int j) const {
  std::vector<int> out;
  for (const Edge& e : edges)
    if (e.pool == j) out.push_back(e.cls);
  return out;
}

namespace {

// Vertices 0..I-1 are classes, I..I+J-1 are pools.
int count_reachable(int I, int J, const std::vector<Edge>& edges) {
  std::vector<std::vector<int>> adj(I + J);
  for (const Edge& e : edges) {
    adj[e.cls].push_back(I + e.pool);
    adj[I + e.pool].push_back(e.cls);
  }
  std::vector<char> seen(I + J, 0);
  std::queue<int> frontier;
  frontier.push(0);
  seen[0] = 1;
  int count = 1;
  while (!frontier.empty()) {
    int v = frontier.front();
    frontier.pop();
    for (int w : adj[v]) {
      if (!seen[w]) {
        seen[w] = 1;
        ++count;
        frontier.push(w);
      }
    }
  }
  return count;
}

}  // namespace

Network validate_network(const NetworkSpec& spec) {
  const int I = static_cast<int>(spec.classes.size());
  const int J = static_cast<int>(spec.nu.size());
  if (I < 1 || J < 1) throw Error(ErrorCode::ShapeMismatch, "need at least one class and one pool");

  Network net;
  net.I = I;
  net.J = J;
  net.lambda.resize(I);
  net.lambda_hat.resize(I);
  net.gamma.resize(I);
  net.nu.resize(J);
  net.mu = Eigen::MatrixXd::Zero(I, J);
  net.mu_hat = Eigen::MatrixXd::Zero(I, J);

  for (int i = 0; i < I; ++i) {
    const auto& c = spec.classes[i];
    if (!(c.lambda > 0.0))
      throw Error(ErrorCode::NonPositiveRate, "lambda of class " + std::to_string(i + 1) + " must be > 0");
    if (!(c.gamma >= 0.0))
      throw Error(ErrorCode::NonPositiveRate, "gamma of class " + std::to_string(i + 1) + " must be >= 0");
    net.lambda(i) = c.lambda;
    net.lambda_hat(i) = c.lambda_hat;
    net.gamma(i) = c.gamma;
  }
  for (int j = 0; j < J; ++j) {
    if (!(spec.nu[j] > 0.0))
      throw Error(ErrorCode::NonPositiveRate, "nu of pool " + std::to_string(j + 1) + " must be > 0");
    net.nu(j) = spec.nu[j];
  }

  std::set<Edge> seen;
  for (const auto& e : spec.edges) {
    if (e.cls < 1 || e.cls > I || e.pool < 1 || e.pool > J)
      throw Error(ErrorCode::ShapeMismatch, "edge (" + std::to_string(e.cls) + "," + std::to_string(e.pool) +
                                                ") references a missing node");
    Edge edge{e.cls - 1, e.pool - 1};
    if (!seen.insert(edge).second)
      throw Error(ErrorCode::NotATree, "duplicate edge (" + std::to_string(e.cls) + "," + std::to_string(e.pool) + ")");
    if (!(e.mu > 0.0))
      throw Error(ErrorCode::NonPositiveRate,
                  "mu on edge (" + std::to_string(e.cls) + "," + std::to_string(e.pool) + ") must be > 0");
    net.mu(edge.cls, edge.pool) = e.mu;
    net.mu_hat(edge.cls, edge.pool) = e.mu_hat;
  }
  net.edges.assign(seen.begin(), seen.end());

  if (net.num_edges() != I + J - 1)
    throw Error(ErrorCode::NotATree, std::to_string(net.num_edges()) + " edges, a tree on " +
                                         std::to_string(I + J) + " nodes needs " + std::to_string(I + J - 1));
  if (count_reachable(I, J, net.edges) != I + J) throw Error(ErrorCode::NotATree, "graph is disconnected");
  return net;
}

LeafSet leaves(const Network& net) {
  LeafSet out;
  for (int i = 0; i < net.I; ++i)
    if (net.pools_of(i).size() == 1) out.classes.push_back({NodeKind::Class, i + 1});
  for (int j = 0; j < net.J; ++j)
    if (net.classes_of(j).size() == 1) out.pools.push_back({NodeKind::Pool, j + 1});
  return out;
}

int reachable_nodes(const Network& net) { return count_reachable(net.I, net.J, net.edges); }

}  // namespace hwctrl
