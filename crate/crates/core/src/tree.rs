//! Organization forests and the codec to and from [`Genome`].
//!
//! Level 1 holds mediators, internal nodes below it are aggregators and the
//! leaves are databases. A mediator with no children is a one-node tree: it
//! sits on level 1 and hosts a single database itself, which is how a leaf
//! enclosed by two `1` digits decodes.

use serde::{Deserialize, Serialize};

use crate::genome::{Genome, GenomeError, Level};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Mediator,
    Aggregator,
    Database,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Node {
    pub role: Role,
    /// Recomputed from depth when a tree is deserialized.
    #[serde(skip)]
    pub level: Level,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<Node>,
}

impl Node {
    pub fn database(level: Level) -> Self {
        Node {
            role: Role::Database,
            level,
            children: Vec::new(),
        }
    }

    pub fn internal(level: Level, children: Vec<Node>) -> Self {
        let role = if level == 1 {
            Role::Mediator
        } else {
            Role::Aggregator
        };
        Node {
            role,
            level,
            children,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn leaf_count(&self) -> usize {
        if self.is_leaf() {
            1
        } else {
            self.children.iter().map(Node::leaf_count).sum()
        }
    }

    /// Deepest level in the subtree.
    pub fn depth(&self) -> Level {
        self.children
            .iter()
            .map(Node::depth)
            .max()
            .unwrap_or(self.level)
    }

    fn relevel(&mut self, level: Level) {
        self.level = level;
        for child in &mut self.children {
            child.relevel(level + 1);
        }
    }
}

/// An ordered forest of mediator-rooted trees.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Node>", into = "Vec<Node>")]
pub struct OrganizationTree {
    pub roots: Vec<Node>,
}

impl TryFrom<Vec<Node>> for OrganizationTree {
    type Error = GenomeError;

    fn try_from(mut roots: Vec<Node>) -> Result<Self, Self::Error> {
        for root in &mut roots {
            root.relevel(1);
        }
        let tree = OrganizationTree { roots };
        tree.check()?;
        Ok(tree)
    }
}

impl From<OrganizationTree> for Vec<Node> {
    fn from(t: OrganizationTree) -> Self {
        t.roots
    }
}

impl OrganizationTree {
    /// Wraps `roots` after checking roles, levels and the leaf count.
    pub fn new(roots: Vec<Node>) -> Result<Self, GenomeError> {
        let tree = OrganizationTree { roots };
        tree.check()?;
        Ok(tree)
    }

    pub fn leaf_count(&self) -> usize {
        self.roots.iter().map(Node::leaf_count).sum()
    }

    pub fn depth(&self) -> Level {
        self.roots.iter().map(Node::depth).max().unwrap_or(0)
    }

    /// Leaf levels in left-to-right order.
    pub fn leaf_levels(&self) -> Vec<Level> {
        fn walk(node: &Node, out: &mut Vec<Level>) {
            if node.is_leaf() {
                out.push(node.level);
            }
            for c in &node.children {
                walk(c, out);
            }
        }
        let mut out = Vec::new();
        for r in &self.roots {
            walk(r, &mut out);
        }
        out
    }

    /// Visits every node in pre-order.
    pub fn for_each_node<F: FnMut(&Node)>(&self, mut f: F) {
        fn walk<F: FnMut(&Node)>(node: &Node, f: &mut F) {
            f(node);
            for c in &node.children {
                walk(c, f);
            }
        }
        for r in &self.roots {
            walk(r, &mut f);
        }
    }

    fn check(&self) -> Result<(), GenomeError> {
        fn check_node(node: &Node, level: Level) -> Result<(), GenomeError> {
            if node.level != level {
                return Err(GenomeError::MalformedTree(format!(
                    "node at depth {level} records level {}",
                    node.level
                )));
            }
            let expected = if level == 1 {
                Role::Mediator
            } else if node.is_leaf() {
                Role::Database
            } else {
                Role::Aggregator
            };
            if node.role != expected {
                return Err(GenomeError::MalformedTree(format!(
                    "{:?} found where a {:?} belongs (level {level})",
                    node.role, expected
                )));
            }
            let next = level.checked_add(1).ok_or_else(|| {
                GenomeError::MalformedTree("tree deeper than 255 levels".into())
            })?;
            node.children.iter().try_for_each(|c| check_node(c, next))
        }
        for r in &self.roots {
            check_node(r, 1)?;
        }
        let leaves = self.leaf_count();
        if leaves < 2 {
            return Err(GenomeError::MalformedTree(format!(
                "{leaves} leaves; at least 2 are required"
            )));
        }
        Ok(())
    }
}

/// Builds the canonical organization for `genome`: roots split at `1`s, and
/// inside a level-k node the sub-segments between digits equal to `k + 1`
/// become children (a leaf when empty).
pub fn decode(genome: &Genome) -> OrganizationTree {
    let roots = genome
        .digits()
        .split(|&d| d <= 1)
        .map(|segment| {
            if segment.is_empty() {
                Node::internal(1, Vec::new())
            } else {
                build(segment, 1)
            }
        })
        .collect();
    OrganizationTree { roots }
}

fn build(segment: &[Level], level: Level) -> Node {
    let children = segment
        .split(|&d| d <= level + 1)
        .map(|sub| {
            if sub.is_empty() {
                Node::database(level + 1)
            } else {
                build(sub, level + 1)
            }
        })
        .collect();
    Node::internal(level, children)
}

/// Writes the separation level of every adjacent leaf pair.
pub fn encode(tree: &OrganizationTree, max_depth: Level) -> Result<Genome, GenomeError> {
    tree.check()?;
    let depth = tree.depth();
    if depth > max_depth {
        return Err(GenomeError::MalformedTree(format!(
            "depth {depth} exceeds maximum depth {max_depth}"
        )));
    }

    // ancestor ids (root first) of every leaf, ids assigned in pre-order
    fn collect(node: &Node, path: &mut Vec<usize>, next_id: &mut usize, out: &mut Vec<Vec<usize>>) {
        path.push(*next_id);
        *next_id += 1;
        if node.is_leaf() {
            out.push(path.clone());
        } else {
            for c in &node.children {
                collect(c, path, next_id, out);
            }
        }
        path.pop();
    }
    let mut paths = Vec::with_capacity(tree.leaf_count());
    let mut next_id = 0;
    for r in &tree.roots {
        collect(r, &mut Vec::new(), &mut next_id, &mut paths);
    }

    let digits = paths
        .windows(2)
        .map(|w| {
            let shared = w[0].iter().zip(&w[1]).take_while(|(a, b)| a == b).count();
            (shared + 1) as Level
        })
        .collect();
    Genome::new(digits, max_depth)
}
