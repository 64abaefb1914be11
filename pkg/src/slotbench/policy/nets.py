"""Policy networks: a shared conv trunk with an action-regression head
(explicit BC) or an energy head over (observation, action) pairs (implicit
BC)."""
import torch
import torch.nn as nn
import torch.nn.functional as F


class ConvTrunk(nn.Module):
    """Strided convs to an 8x8 map, then a linear squeeze to a flat feature."""

    def __init__(self, in_channels, feat_dim=256):
        super().__init__()
        self.conv1 = nn.Conv2d(in_channels, 32, 5, stride=2, padding=2)
        self.conv2 = nn.Conv2d(32, 32, 5, stride=2, padding=2)
        self.conv3 = nn.Conv2d(32, 64, 3, stride=2, padding=1)
        self.squeeze = nn.Conv2d(64, 16, 1)
        self.fc = nn.Linear(16 * 8 * 8, feat_dim)

    def forward(self, x):
        x = F.relu(self.conv1(x))
        x = F.relu(self.conv2(x))
        x = F.relu(self.conv3(x))
        x = F.relu(self.squeeze(x))
        return F.relu(self.fc(x.flatten(1)))


class PolicyNet(nn.Module):
    """Explicit BC: observation -> (dx, dy)."""

    def __init__(self, in_channels, max_step, feat_dim=256):
        super().__init__()
        self.max_step = max_step
        self.trunk = ConvTrunk(in_channels, feat_dim)
        self.head = nn.Sequential(
            nn.Linear(feat_dim, feat_dim), nn.ReLU(), nn.Linear(feat_dim, 2)
        )

    def forward(self, obs):
        # head works in action units of max_step; rescale on the way out
        return self.head(self.trunk(obs)) * self.max_step


class EnergyNet(nn.Module):
    """Implicit BC: E(observation, action), lower is better."""

    def __init__(self, in_channels, max_step, feat_dim=256):
        super().__init__()
        self.max_step = max_step
        self.trunk = ConvTrunk(in_channels, feat_dim)
        self.head = nn.Sequential(
            nn.Linear(feat_dim + 2, feat_dim),
            nn.ReLU(),
            nn.Linear(feat_dim, feat_dim),
            nn.ReLU(),
            nn.Linear(feat_dim, 1),
        )

    def energy(self, feat, actions):
        """feat (B, F) with actions (B, M, 2) -> energies (B, M)."""
        b, m, _ = actions.shape
        rep = feat.unsqueeze(1).expand(-1, m, -1)
        inp = torch.cat([rep, actions / self.max_step], dim=-1)
        return self.head(inp).squeeze(-1)

    def forward(self, obs, actions):
        return self.energy(self.trunk(obs), actions)
