# tools/tool_factory.py
import importlib
import logging
from typing import Dict

from tools.base_tool import BaseTool
from tools.config_loader import RunConfig
from utils.errors import ConfigError

COMMANDS = ("train", "caption", "trace-graph", "gradcheck", "eval", "synth")


class ToolFactory:
    """Resolves a command name to its tool: ``trace-graph`` -> ``tools.trace_graph_tool.TraceGraphTool``."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.tools: Dict[str, BaseTool] = {}
        self.logger = logging.getLogger(self.__class__.__name__)

    def get_tool(self, command: str) -> BaseTool:
        """
        Get or create the tool for a command.

        Args:
            command: one of COMMANDS

        Returns:
            BaseTool: Instantiated tool
        """
        if command in self.tools:
            return self.tools[command]
        if command not in COMMANDS:
            raise ConfigError(f"Unknown command {command!r}; expected one of {COMMANDS}", field="command")

        tool_name = command.replace("-", "_")
        class_name = ''.join(word.capitalize() for word in tool_name.split('_')) + 'Tool'
        module_name = f"tools.{tool_name}_tool"
        self.logger.debug(f"Attempting to load tool: {module_name}.{class_name}")
        try:
            module = importlib.import_module(module_name)
            tool_class = getattr(module, class_name)
        except (ImportError, AttributeError) as e:
            self.logger.error(f"❌ Failed to load tool {command}: {e}")
            raise

        tool = tool_class(name=command, config=self.config)
        self.tools[command] = tool
        self.logger.debug(f"✅ Created tool: {command}")
        return tool
